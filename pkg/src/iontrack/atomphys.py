"""Hyperfine Zeeman physics and ion-chain geometry.

Forward and inverse maps between magnetic field and the ground-state
hyperfine transition frequency of a single trapped ion (171Yb+ by
default), the frequency/position conversion through a static magnetic
field gradient, equilibrium positions of a small ion chain, and a
least-squares gradient calibration from per-ion frequencies.

All frequencies in this package are angular (rad/s) unless a name or
docstring says otherwise.  Fields are tesla, positions are metres.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PhysicalConstants",
    "CODATA",
    "IonSpecies",
    "TrapEnvironment",
    "GradientCalibration",
    "EquilibriumConvergenceError",
    "BREIT_RABI_VARIANTS",
    "transition_frequency",
    "transition_frequency_derivative",
    "field_from_frequency",
    "frequency_to_position_slope",
    "frequency_shift_to_position",
    "axial_stiffness",
    "length_scale",
    "equilibrium_positions",
    "calibrate_gradient",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """Fundamental constants (SI).  Defaults are CODATA-2018 values."""

    planck_h: float = 6.62607015e-34          # J s (exact)
    bohr_magneton: float = 9.2740100783e-24    # J/T
    nuclear_magneton: float = 5.0507837461e-27  # J/T
    elementary_charge: float = 1.602176634e-19  # C (exact)
    vacuum_permittivity: float = 8.8541878128e-12  # F/m
    atomic_mass_unit: float = 1.66053906660e-27   # kg

    @property
    def hbar(self) -> float:
        return self.planck_h / (2.0 * math.pi)


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class IonSpecies:
    """Ion species parameters for the hyperfine clock-to-stretch transition.

    hyperfine_constant is the zero-field splitting as an angular
    frequency (rad/s).  g_electron and g_nucleus are dimensionless;
    the nuclear moment couples through the nuclear magneton.
    """

    label: str
    mass: float                 # kg
    hyperfine_constant: float   # rad/s
    g_electron: float
    g_nucleus: float

    def __post_init__(self) -> None:
        if self.mass <= 0.0:
            raise ValueError("ion mass must be positive")
        if self.hyperfine_constant <= 0.0:
            raise ValueError("hyperfine constant must be positive")

    @classmethod
    def ytterbium_171(cls, constants: PhysicalConstants = CODATA) -> "IonSpecies":
        """171Yb+ with the measured zero-field splitting near 12.64 GHz."""
        return cls(
            label="171Yb+",
            mass=170.936323 * constants.atomic_mass_unit,
            hyperfine_constant=2.0 * math.pi * 12_642_812_118.471,
            g_electron=2.0025,
            g_nucleus=0.9837,
        )


@dataclass(frozen=True)
class TrapEnvironment:
    """Trap frequencies, static field and gradient at the ion site.

    voltage_to_field converts a control-electrode voltage offset to the
    residual axial electric field it produces at the ion, in (V/m)/V.
    It is a pure geometry coefficient supplied by configuration.
    """

    omega_z: float              # axial secular frequency, rad/s
    omega_r: float              # radial secular frequency, rad/s
    offset_field: float         # static field at the working point, T
    gradient: float             # dB/dz along the trap axis, T/m
    voltage_to_field: float = 8.2e-4   # (V/m)/V

    def __post_init__(self) -> None:
        if self.omega_z <= 0.0 or self.omega_r <= 0.0:
            raise ValueError("secular frequencies must be positive")
        if self.offset_field < 0.0:
            raise ValueError("offset field must be non-negative")
        if self.gradient == 0.0:
            raise ValueError("field gradient must be non-zero")

    @classmethod
    def default(cls) -> "TrapEnvironment":
        return cls(
            omega_z=2.0 * math.pi * 108_104.0,
            omega_r=2.0 * math.pi * 534_400.0,
            offset_field=442.09e-6,
            gradient=19.07,
        )


# Radical conventions for the field dependence of the transition.  The
# "standard" stretch-state radical is 1 + 2xB + (xB)^2; "single-cross"
# keeps a single xB cross term, a form that appears in some references
# and whose low-field slope is half the standard one.
BREIT_RABI_VARIANTS = ("standard", "single-cross")


def _cross_term_coefficient(variant: str) -> float:
    if variant == "standard":
        return 2.0
    if variant == "single-cross":
        return 1.0
    raise ValueError(f"unknown Breit-Rabi variant {variant!r}")


def transition_frequency(
    species: IonSpecies,
    field_t: float,
    *,
    variant: str = "standard",
    constants: PhysicalConstants = CODATA,
) -> float:
    """Transition angular frequency (rad/s) at a static field (T).

    Evaluates

        E/hbar = [g_n uN B + (A/2) sqrt(1 + c xB + (xB)^2)
                           + (A/2) sqrt(1 + (xB)^2)] / hbar

    with A the zero-field splitting in energy units, the dimensionless
    field ratio x = (g_e uB - g_n uN)/A, and c = 2 ("standard") or
    c = 1 ("single-cross").  At B = 0 both radicals are 1 and the
    result is the zero-field splitting.
    """
    field_t = float(field_t)
    if field_t < 0.0:
        raise ValueError("field must be non-negative")
    c = _cross_term_coefficient(variant)
    a_energy = constants.hbar * species.hyperfine_constant
    x = (species.g_electron * constants.bohr_magneton
         - species.g_nucleus * constants.nuclear_magneton) / a_energy
    xb = x * field_t
    r1 = math.sqrt(1.0 + c * xb + xb * xb)
    r2 = math.sqrt(1.0 + xb * xb)
    energy = (species.g_nucleus * constants.nuclear_magneton * field_t
              + 0.5 * a_energy * (r1 + r2))
    return energy / constants.hbar


def transition_frequency_derivative(
    species: IonSpecies,
    field_t: float,
    *,
    variant: str = "standard",
    constants: PhysicalConstants = CODATA,
) -> float:
    """Analytic d(nu)/dB of `transition_frequency`, in (rad/s)/T."""
    field_t = float(field_t)
    if field_t < 0.0:
        raise ValueError("field must be non-negative")
    c = _cross_term_coefficient(variant)
    a_energy = constants.hbar * species.hyperfine_constant
    x = (species.g_electron * constants.bohr_magneton
         - species.g_nucleus * constants.nuclear_magneton) / a_energy
    xb = x * field_t
    r1 = math.sqrt(1.0 + c * xb + xb * xb)
    r2 = math.sqrt(1.0 + xb * xb)
    d_energy = (species.g_nucleus * constants.nuclear_magneton
                + 0.25 * a_energy * x * (c + 2.0 * xb) / r1
                + 0.5 * a_energy * x * xb / r2)
    return d_energy / constants.hbar


def field_from_frequency(
    species: IonSpecies,
    nu: float,
    *,
    variant: str = "standard",
    constants: PhysicalConstants = CODATA,
    field_max: float = 0.1,
) -> float:
    """Invert `transition_frequency`: field (T) for a frequency (rad/s).

    The forward map is strictly increasing in B, so the root is
    bracketed on [0, field_max] and found by bisection to a relative
    frequency residual of 1e-12, then polished with one Newton step.
    """
    nu = float(nu)
    nu_zero = transition_frequency(species, 0.0, variant=variant, constants=constants)
    if nu < nu_zero:
        raise ValueError("frequency below the zero-field splitting")
    if nu == nu_zero:
        return 0.0
    lo, hi = 0.0, float(field_max)
    f_hi = transition_frequency(species, hi, variant=variant, constants=constants) - nu
    if f_hi < 0.0:
        raise ValueError("frequency above the bracket maximum; raise field_max")
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = transition_frequency(species, mid, variant=variant, constants=constants) - nu
        if abs(f_mid) <= 1e-12 * nu or (hi - lo) <= 1e-18:
            break
        if f_mid < 0.0:
            lo = mid
        else:
            hi = mid
    b = mid
    slope = transition_frequency_derivative(species, b, variant=variant, constants=constants)
    b -= (transition_frequency(species, b, variant=variant, constants=constants) - nu) / slope
    return max(b, 0.0)


def frequency_to_position_slope(
    env: TrapEnvironment,
    species: IonSpecies,
    *,
    variant: str = "standard",
    constants: PhysicalConstants = CODATA,
) -> float:
    """d(nu)/dz at the working point, in (rad/s)/m.

    Chain rule through the static gradient: d(nu)/dz = d(nu)/dB * dB/dz,
    with the slope evaluated at the environment's offset field.
    """
    return transition_frequency_derivative(
        species, env.offset_field, variant=variant, constants=constants
    ) * env.gradient


def frequency_shift_to_position(
    delta_nu: float,
    env: TrapEnvironment,
    species: IonSpecies,
    *,
    variant: str = "standard",
    constants: PhysicalConstants = CODATA,
) -> float:
    """Convert a frequency offset (rad/s) to an axial displacement (m)."""
    return float(delta_nu) / frequency_to_position_slope(
        env, species, variant=variant, constants=constants
    )


def axial_stiffness(
    env: TrapEnvironment,
    species: IonSpecies,
) -> float:
    """Axial restoring-force constant k = m * omega_z^2, in N/m."""
    return species.mass * env.omega_z ** 2


def length_scale(
    env: TrapEnvironment,
    species: IonSpecies,
    constants: PhysicalConstants = CODATA,
) -> float:
    """Coulomb/harmonic length scale l = (e^2 / (4 pi eps0 m w_z^2))^(1/3)."""
    coulomb = constants.elementary_charge ** 2 / (4.0 * math.pi * constants.vacuum_permittivity)
    return (coulomb / (species.mass * env.omega_z ** 2)) ** (1.0 / 3.0)


class EquilibriumConvergenceError(RuntimeError):
    """Chain equilibrium did not converge; carries the last iterate (m)."""

    def __init__(self, message: str, last_positions: np.ndarray):
        super().__init__(message)
        self.last_positions = last_positions


def _chain_gradient(u: np.ndarray) -> np.ndarray:
    # dE/du_i in scaled units: harmonic pull plus pairwise Coulomb push.
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return u - np.sum(np.sign(diff) / diff ** 2, axis=1)


def _chain_hessian(u: np.ndarray) -> np.ndarray:
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    off = -2.0 / np.abs(diff) ** 3
    h = off.copy()
    np.fill_diagonal(h, 1.0 - np.sum(off, axis=1))
    return h


def equilibrium_positions(
    n_ions: int,
    env: TrapEnvironment,
    species: IonSpecies,
    constants: PhysicalConstants = CODATA,
    *,
    max_iter: int = 100,
    grad_tol: float = 1e-12,
) -> np.ndarray:
    """Equilibrium positions (m, ascending) of n_ions in the axial well.

    Minimises sum(m w_z^2 z^2 / 2) + sum(e^2 / (4 pi eps0 |z_i - z_j|))
    by damped Newton iteration on the scaled force-balance equations,
    starting from a uniformly spaced chain.  Converged when the scaled
    gradient 2-norm drops below grad_tol.
    """
    if not 1 <= n_ions <= 32:
        raise ValueError("n_ions must be in 1..32")
    scale = length_scale(env, species, constants)
    if n_ions == 1:
        return np.zeros(1)
    # Uniform start; 2.018/N^0.559 approximates the true minimum spacing.
    spacing = 2.018 / n_ions ** 0.559
    u = spacing * (np.arange(n_ions) - 0.5 * (n_ions - 1))
    g = _chain_gradient(u)
    for _ in range(max_iter):
        norm = np.linalg.norm(g)
        if norm < grad_tol:
            return u * scale
        step = np.linalg.solve(_chain_hessian(u), -g)
        lam = 1.0
        for _ in range(40):
            trial = u + lam * step
            if np.all(np.diff(trial) > 0.0):
                g_trial = _chain_gradient(trial)
                if np.linalg.norm(g_trial) < norm:
                    u, g = trial, g_trial
                    break
            lam *= 0.5
        else:
            break
    if np.linalg.norm(_chain_gradient(u)) < grad_tol:
        return u * scale
    raise EquilibriumConvergenceError(
        f"no equilibrium after {max_iter} Newton iterations", u * scale
    )


@dataclass(frozen=True)
class GradientCalibration:
    """Least-squares field gradient from per-ion transition frequencies."""

    gradient: float             # T/m
    gradient_stderr: float      # T/m; nan with only two ions (zero dof)
    field_intercept: float      # T at z = 0
    fields: np.ndarray = field(repr=False, default=None)
    positions: np.ndarray = field(repr=False, default=None)
    monotone: bool = True


def calibrate_gradient(
    frequencies,
    env: TrapEnvironment,
    species: IonSpecies,
    *,
    variant: str = "standard",
    constants: PhysicalConstants = CODATA,
) -> GradientCalibration:
    """Fit B(z) = B0 + B' z through per-ion fields.

    Each transition frequency (rad/s, one per ion, ordered along the
    chain) is inverted to a field; fields are paired with the chain's
    equilibrium positions and fitted by ordinary least squares.  The
    slope standard error comes from the fit residuals; with exactly two
    ions there are no residual degrees of freedom and it is nan.
    Non-monotone fields along the chain set monotone=False.
    """
    nu = np.asarray(frequencies, dtype=float)
    if nu.ndim != 1 or nu.size < 2:
        raise ValueError("need at least two per-ion frequencies")
    n = nu.size
    fields = np.array([
        field_from_frequency(species, v, variant=variant, constants=constants)
        for v in nu
    ])
    z = equilibrium_positions(n, env, species, constants)
    dz = z - z.mean()
    szz = float(np.dot(dz, dz))
    slope = float(np.dot(dz, fields)) / szz
    intercept = float(fields.mean() - slope * z.mean())
    resid = fields - (intercept + slope * z)
    if n > 2:
        stderr = math.sqrt(float(np.dot(resid, resid)) / (n - 2) / szz)
    else:
        stderr = math.nan
    diffs = np.diff(fields)
    monotone = bool(np.all(diffs > 0.0) or np.all(diffs < 0.0))
    return GradientCalibration(
        gradient=slope,
        gradient_stderr=stderr,
        field_intercept=intercept,
        fields=fields,
        positions=z,
        monotone=monotone,
    )
