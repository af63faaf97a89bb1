"""Monte Carlo laboratory for 1/N corrections to local eigenvalue statistics.

Modules
-------
entry_dist   scalar entry laws with exact fourth cumulants
ensembles    Wigner / covariance-factor draws and Gaussian-divisible mixing
spectra      dense eigen/singular values and local rescaling
estimator    ECDFs, DKW bands, 1/N and kurtosis regressions
theory       limit laws, Fredholm determinants, correction models
experiments  config-driven sampling, fitting and CLI
"""
__version__ = "0.1.0"
