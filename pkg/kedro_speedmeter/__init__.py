""" Kedro plugin for modelling, fitting and locking a polarization
circulation speed meter """

__version__ = "0.1.0"
