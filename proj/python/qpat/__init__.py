"""Radiative transport and photoacoustic inversion tools."""

from ._core import (
    ConfigError,
    QpatError,
    __version__,
    check_config,
    fnv1a,
    forward_constant,
    h_of_g,
    hg_phase,
    invert_h,
    read_pgrid,
    run_experiment,
    sigma_a_scattering_free,
    write_pgrid,
)
