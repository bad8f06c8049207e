""" Kedro plugin for modelling and commissioning a polarization circulation
speed meter """
import logging
import warnings
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Optional, Tuple

import click
import numpy as np
from kedro.framework.cli.utils import KedroCliError

from .config import ConfigError, FIXTURES_PATH, RunConfig, resolve_config_path
from .fit import FitError, fit_loss, model_pcc
from .helpers import (
    DataFileError,
    copy_template_files,
    ensure_out_dir,
    read_time_series,
    read_transfer_function,
    write_csv,
    write_report,
)
from .lockacq import LockAcquisitionError, run_acquisition
from .model import (
    ComplexResponse,
    ParameterError,
    derive_rates,
    observable_H,
    observable_H_exact,
    speed_response_exact,
    speed_response_firstorder,
)
from .noise import SpectrumError, estimate_asd, summarize
from .synth import TF_MODES, make_grid, synth_noise_timeseries, synth_tf

TEMPLATE_PATH = Path(__file__).parent / "template"

DEFAULT_CONFIG_FILES = (FIXTURES_PATH / "table1.yml", FIXTURES_PATH / "table2.yml")

RESPONSE_MODES = ("exact", "firstorder") + TF_MODES

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _config_callback(ctx, param, value):  # pylint: disable=unused-argument
    paths = []
    for item in value:
        path = resolve_config_path(item)
        if not path.is_file():
            raise click.BadParameter(
                "Configuration file `{0}` does not exist".format(item)
            )
        paths.append(path)
    return tuple(paths)


def _verbose_callback(ctx, param, value):  # pylint: disable=unused-argument
    if value:
        logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
    return value


def _data_callback(ctx, param, value):  # pylint: disable=unused-argument
    # outputs are named after the input stem
    stems = [Path(item).stem for item in value]
    duplicates = sorted({stem for stem in stems if stems.count(stem) > 1})
    if duplicates:
        raise click.BadParameter(
            "Inputs share the file name `{0}`, their outputs would "
            "overwrite each other".format("`, `".join(duplicates))
        )
    return value


def _make_config_option(**kwargs):
    defaults = {
        "multiple": True,
        "type": str,
        "callback": _config_callback,
        "help": "YAML configuration file, or the name of a packaged fixture "
        "(`table1`, `table2`). Repeat to merge several files; later files win. "
        "Default is both packaged fixtures",
    }
    kwargs = dict(defaults, **kwargs)
    return click.option("--config", "-c", **kwargs)


def _make_out_option(**kwargs):
    defaults = {
        "type": click.Path(file_okay=False),
        "default": ".",
        "show_default": True,
        "help": "Directory the output files are written to",
    }
    kwargs = dict(defaults, **kwargs)
    return click.option("--out", **kwargs)


def _make_seed_option(**kwargs):
    defaults = {
        "type": int,
        "default": None,
        "help": "Seed replacing every seed of the configuration",
    }
    kwargs = dict(defaults, **kwargs)
    return click.option("--seed", **kwargs)


def _make_gnuplot_option(**kwargs):
    defaults = {
        "is_flag": True,
        "default": False,
        "help": "Also write a gnuplot script plotting the output",
    }
    kwargs = dict(defaults, **kwargs)
    return click.option("--gnuplot", **kwargs)


def _make_verbose_option(**kwargs):
    defaults = {
        "is_flag": True,
        "default": False,
        "callback": _verbose_callback,
        "help": "Log progress and echo the names of created files",
    }
    kwargs = dict(defaults, **kwargs)
    return click.option("--verbose", "-v", **kwargs)


def _common_options(func):
    for option in (
        _make_verbose_option(),
        _make_gnuplot_option(),
        _make_seed_option(),
        _make_out_option(),
        _make_config_option(),
    ):
        func = option(func)
    return func


def _load_config(config_files: Iterable[Path], seed: Optional[int]) -> RunConfig:
    files = tuple(config_files) or DEFAULT_CONFIG_FILES
    with _reported_errors():
        try:
            config = RunConfig.load(files)
        except ConfigError as exc:
            raise click.BadParameter(str(exc), param_hint="'--config'") from exc
    return config.with_seed(seed)


@contextmanager
def _reported_errors():
    """Echo warnings and map library errors onto click exit codes."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            yield
        except (ConfigError, DataFileError) as exc:
            raise click.UsageError(str(exc)) from exc
        except (
            FitError,
            SpectrumError,
            LockAcquisitionError,
            ParameterError,
        ) as exc:
            raise KedroCliError(str(exc)) from exc
        finally:
            seen = set()
            for warning in caught:
                message = "Warning: {0}".format(warning.message)
                if message not in seen:
                    seen.add(message)
                    click.secho(message, fg="yellow")


def _copy_gnuplot(out_path: Path, script: str, gnuplot: bool, verbose: bool):
    if gnuplot:
        copy_template_files(out_path, TEMPLATE_PATH, [script], verbose)


@click.group(name="SpeedMeter")
def commands():
    """ Kedro plugin for modelling and commissioning a speed meter """
    pass


@commands.group(
    name="speedmeter", context_settings=dict(help_option_names=["-h", "--help"])
)
def speedmeter_group():
    """Model, fit, lock and analyse a polarization circulation speed meter."""


# pylint: disable=too-many-arguments
@speedmeter_group.command(name="response")
@click.option(
    "--mode",
    type=click.Choice(RESPONSE_MODES),
    default="ratio",
    show_default=True,
    help="`exact` and `firstorder` speed meter responses, `ratio` for the "
    "speed meter / position meter ratio, `exact_ratio` for the same ratio "
    "of exact quadrature readouts. Both ratios use the PCC as seen by the "
    "fit model",
)
@_common_options
def response(config, out, seed, gnuplot, verbose, mode):
    """Evaluate a model response on the configured frequency grid.

    Writes `response.csv` with columns f_hz, re, im, mag and phase_deg and
    prints the cutoff gamma_cut / 2pi of the evaluated model.
    """
    run_config = _load_config(config, seed)
    with _reported_errors():
        freqs = make_grid(run_config.grid)
        pcc = run_config.pcc
        if mode in TF_MODES:
            pcc = model_pcc(pcc, run_config.fit.pcc_loss_in_model)
        rates = derive_rates(run_config.constants, run_config.main_cavity, pcc)
        omega = 2.0 * np.pi * freqs
        if mode == "exact":
            values = speed_response_exact(
                rates, pcc, pcc.dphi_ret + pcc.dphi_pcc, omega
            )
        elif mode == "firstorder":
            values = speed_response_firstorder(rates, omega)
        elif mode == "ratio":
            values = observable_H(rates, freqs, run_config.fit.include_detuning)
        else:
            values = observable_H_exact(
                rates, pcc, pcc.dphi_ret + pcc.dphi_pcc, freqs
            )
        result = ComplexResponse(freqs, values)

    out_path = ensure_out_dir(Path(out))
    write_csv(
        out_path / "response.csv",
        ("f_hz", "re", "im", "mag", "phase_deg"),
        (
            result.freqs,
            result.values.real,
            result.values.imag,
            result.mag,
            result.phase_deg,
        ),
        verbose,
    )
    # the ratio modes leave the PCC loss out of the cutoff unless the fit
    # models it
    click.echo("gamma_cut_hz: {0:.6e}".format(rates.gamma_cut / (2.0 * np.pi)))
    _copy_gnuplot(out_path, "response.gp", gnuplot, verbose)


@speedmeter_group.command(name="fit")
@click.option(
    "--data",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Measured transfer function CSV (f_hz, re, im). Default is data "
    "synthesized from the configuration",
)
@_common_options
def fit(config, out, seed, gnuplot, verbose, data):
    """Fit the main cavity loss to a measured transfer function.

    Writes `fit_report.txt` and `fit_residuals.csv`. Exits with status 1
    when the fit did not converge.
    """
    run_config = _load_config(config, seed)
    with _reported_errors():
        if data is None:
            measured = synth_tf(
                run_config.constants,
                run_config.main_cavity,
                model_pcc(run_config.pcc, run_config.fit.pcc_loss_in_model),
                run_config.grid,
                run_config.noise_model(),
                include_detuning=run_config.fit.include_detuning,
            )
        else:
            measured = read_transfer_function(Path(data))
        result = fit_loss(
            measured,
            run_config.fit,
            run_config.constants,
            run_config.main_cavity,
            run_config.pcc,
        )

    out_path = ensure_out_dir(Path(out))
    write_report(out_path / "fit_report.txt", result.to_report(), verbose)
    write_csv(
        out_path / "fit_residuals.csv",
        ("f_hz", "re", "im"),
        (result.freqs, result.residuals.real, result.residuals.imag),
        verbose,
    )
    _copy_gnuplot(out_path, "fit.gp", gnuplot, verbose)
    click.echo("loss_cav_hat_ppm: {0:.4f}".format(result.loss_cav_hat * 1e6))
    if not result.converged:
        raise KedroCliError(
            "Loss fit did not converge within {0} iterations".format(result.n_iters)
        )


@speedmeter_group.command(name="lock")
@_common_options
def lock(config, out, seed, gnuplot, verbose):
    """Simulate the lock acquisition sequence.

    Writes `lock_trace.csv`, `lock_transitions.csv` and `lock_report.txt`.
    Exits with status 1, after writing the partial trace, unless the run
    ends in the SpeedMeter state.
    """
    run_config = _load_config(config, seed)
    with _reported_errors():
        plant = run_config.lock_plant()
        trace = run_acquisition(
            run_config.servo,
            plant,
            run_config.lock.duration,
            run_config.lock.dt,
            run_config.disturbance,
            run_config.seeds.lock,
            run_config.lock.settle_time,
        )

    out_path = ensure_out_dir(Path(out))
    write_csv(
        out_path / "lock_trace.csv",
        (
            "t",
            "lock_state",
            "ir_trans",
            "gr_trans",
            "dcpd1",
            "pcc_length",
            "gr_freq_offset",
            "main_detuning",
        ),
        (
            trace.t,
            [state.value for state in trace.lock_state],
            trace.ir_trans,
            trace.gr_trans,
            trace.dcpd1,
            trace.pcc_length,
            trace.gr_freq_offset,
            trace.main_detuning,
        ),
        verbose,
    )
    write_csv(
        out_path / "lock_transitions.csv",
        ("t", "state"),
        (
            [t for t, _, _ in trace.transitions],
            [new.value for _, _, new in trace.transitions],
        ),
        verbose,
    )
    write_report(
        out_path / "lock_report.txt",
        {
            "success": trace.success,
            "final_state": trace.final_state.value,
            "n_samples": len(trace),
            "end_time": float(trace.t[-1]),
            "n_transitions": len(trace.transitions),
        },
        verbose,
    )
    _copy_gnuplot(out_path, "lock.gp", gnuplot, verbose)
    if not trace.success:
        raise KedroCliError(trace.diagnostic)
    click.echo(" -> ".join(state.value for state in trace.state_sequence))


def _noise_inputs(
    run_config: RunConfig, data: Tuple[str, ...], rate: Optional[float]
) -> Iterable[Tuple[str, np.ndarray, float]]:
    if not data:
        series = run_config.series
        samples = synth_noise_timeseries(
            series.scaled_segments(),
            series.duration,
            series.rate,
            run_config.seeds.series,
        )
        yield "synthetic", samples, series.rate
        return
    for item in data:
        path = Path(item)
        samples, sample_rate = read_time_series(path, rate)
        yield path.stem, samples, sample_rate


@speedmeter_group.command(name="noise")
@click.option(
    "--data",
    type=click.Path(exists=True, dir_okay=False),
    multiple=True,
    callback=_data_callback,
    help="PCC length series CSV (t, length; or a single length column with "
    "--rate). Repeat to analyse several files. Default is a series "
    "synthesized from the configuration",
)
@click.option(
    "--rate",
    type=click.FloatRange(min=0, min_open=True),
    default=None,
    help="Sample rate [Hz] of single-column input",
)
@_common_options
def noise(config, out, seed, gnuplot, verbose, data, rate):
    """Estimate the ASD and accumulated RMS of PCC length series.

    Writes `<name>_spectrum.csv` and `<name>_summary.txt` for every input.
    """
    run_config = _load_config(config, seed)
    out_path = ensure_out_dir(Path(out))
    with _reported_errors():
        rates = run_config.rates()
        for stem, samples, sample_rate in _noise_inputs(run_config, data, rate):
            result = estimate_asd(samples, sample_rate, run_config.spectrum)
            summary = summarize(
                result,
                run_config.constants,
                rates,
                run_config.spectrum.readout_frequency,
            )
            write_csv(
                out_path / "{0}_spectrum.csv".format(stem),
                ("f_hz", "asd", "cum_rms"),
                (result.freqs, result.asd, result.cum_rms),
                verbose,
            )
            write_report(out_path / "{0}_summary.txt".format(stem), summary, verbose)
            click.echo("{0}: total_rms {1:.4e} m".format(stem, result.total_rms))
    _copy_gnuplot(out_path, "noise.gp", gnuplot, verbose)


@speedmeter_group.group(name="synth")
def synth_group():
    """Write synthetic input data for `fit` and `noise`."""


@synth_group.command(name="tf")
@click.option(
    "--mode",
    type=click.Choice(TF_MODES),
    default="ratio",
    show_default=True,
    help="Model the measurement is drawn from",
)
@_common_options
def synth_transfer_function(config, out, seed, gnuplot, verbose, mode):
    """Write a noisy speed meter / position meter ratio to `synthetic_tf.csv`.

    The PCC loss enters the model as configured by `fit.pcc_loss_in_model`.
    """
    run_config = _load_config(config, seed)
    with _reported_errors():
        measured = synth_tf(
            run_config.constants,
            run_config.main_cavity,
            model_pcc(run_config.pcc, run_config.fit.pcc_loss_in_model),
            run_config.grid,
            run_config.noise_model(),
            mode=mode,
            include_detuning=run_config.fit.include_detuning,
        )

    out_path = ensure_out_dir(Path(out))
    write_csv(
        out_path / "synthetic_tf.csv",
        ("f_hz", "re", "im"),
        (measured.freqs, measured.values.real, measured.values.imag),
        verbose,
    )
    _copy_gnuplot(out_path, "response.gp", gnuplot, verbose)


@synth_group.command(name="series")
@_common_options
def synth_series(config, out, seed, gnuplot, verbose):
    """Write a PCC length series drawn from the `series` ASD to
    `synthetic_series.csv`."""
    run_config = _load_config(config, seed)
    series = run_config.series
    with _reported_errors():
        samples = synth_noise_timeseries(
            series.scaled_segments(),
            series.duration,
            series.rate,
            run_config.seeds.series,
        )

    out_path = ensure_out_dir(Path(out))
    write_csv(
        out_path / "synthetic_series.csv",
        ("t", "length"),
        (np.arange(samples.size) / series.rate, samples),
        verbose,
    )
    _copy_gnuplot(out_path, "noise.gp", gnuplot, verbose)
