"""Reduced compression-field shear model for one reinforced-concrete beam.

Given a specimen, an assumed elastic/plastic regime for each reinforcement
group and a candidate degradation function kappa(eps1), the model reduces to
two equilibrium residuals in two unknowns: the principal tensile strain eps1
and the diagonal strut angle theta. Everything else (concrete stresses,
strains, steel stresses) follows from a substitution chain evaluated at
(eps1, theta). Roots are located by damped Newton-Raphson over a grid of
eps1 seeds.

Units are fixed: N, mm, MPa, dimensionless strain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .errors import ChainInfeasibleError, ConfigError, EpsMaxError, InputError

ES = 200000.0  # steel elastic modulus, MPa

_THETA_LO = 1e-9
_THETA_HI = math.pi / 2 - 1e-9
_EPS1_HI = 0.5  # sanity box for the root search


@dataclass(frozen=True)
class Specimen:
    """Geometry, materials and experimental record of one tested beam."""

    name: str
    alpha: float  # global concrete-steel adherence coefficient
    alpha1: float  # adherence, lower longitudinal bars
    alpha2: float  # adherence, upper longitudinal bars (0 = none present)
    alpha_t: float  # adherence, stirrups
    z: float  # lever arm, mm
    bw: float  # effective web width, mm
    As_x1: float  # steel area, lower longitudinal, mm^2
    As_x2: float  # steel area, upper longitudinal, mm^2
    As_t: float  # steel area, stirrups, mm^2
    s: float  # stirrup spacing, mm
    fy_x1: float  # yield strength, MPa
    fy_x2: float
    fy_t: float
    fc: float  # concrete compressive strength, MPa
    eps_c: float  # strain at fc
    fctm: float  # concrete tensile strength, MPa
    Ac_x1: float  # effective concrete tension area, mm^2
    Ac_x2: float
    Ac_t: float
    V: float  # ultimate shear force, N
    sigma_st_exp: float  # experimental stirrup stress at failure, MPa


_POSITIVE_FIELDS = (
    "alpha", "alpha1", "alpha_t", "z", "bw", "As_x1", "As_t", "s",
    "fy_x1", "fy_t", "fc", "eps_c", "fctm", "Ac_x1", "Ac_t", "V",
    "sigma_st_exp",
)
_UPPER_FIELDS = ("As_x2", "fy_x2", "Ac_x2")


def validate_specimen(spec: Specimen) -> Specimen:
    """Check field-level invariants, naming the offending field on failure."""
    for name in _POSITIVE_FIELDS:
        v = getattr(spec, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise InputError(f"specimen {spec.name!r}: field {name} must be > 0, got {v}")
    if spec.alpha2 < 0:
        raise InputError(f"specimen {spec.name!r}: field alpha2 must be >= 0")
    for name in _UPPER_FIELDS:
        v = getattr(spec, name)
        if v < 0 or not math.isfinite(v):
            raise InputError(f"specimen {spec.name!r}: field {name} must be >= 0, got {v}")
        if spec.alpha2 > 0 and v == 0:
            raise InputError(
                f"specimen {spec.name!r}: field {name} must be > 0 when alpha2 > 0"
            )
    return spec


@dataclass(frozen=True)
class DerivedMaterial:
    """Moduli and characteristic strains derived from a specimen."""

    Ec: float  # concrete elastic modulus, MPa
    eps_ctm: float  # cracking strain
    eps_y_x1: float  # yield strains
    eps_y_x2: float
    eps_y_t: float
    Es: float = ES


def derived_material(spec: Specimen) -> DerivedMaterial:
    """Ec = 8500 (fc + 8)^(1/3); cracking and yield strains as ratios."""
    if spec.fc <= 0:
        raise InputError(f"specimen {spec.name!r}: fc must be > 0")
    Ec = 8500.0 * (spec.fc + 8.0) ** (1.0 / 3.0)
    return DerivedMaterial(
        Ec=Ec,
        eps_ctm=spec.fctm / Ec,
        eps_y_x1=spec.fy_x1 / ES,
        eps_y_x2=spec.fy_x2 / ES,
        eps_y_t=spec.fy_t / ES,
    )


@dataclass(frozen=True)
class CubicKappa:
    """kappa(eps1) = a x^3 + b x^2 + c x + d evaluated at x = eps1 * 1000.

    The argument is in milli-strain; published cubic coefficients only make
    sense at that scale.
    """

    a: float
    b: float
    c: float
    d: float

    label = "cubic"

    @property
    def coefficients(self) -> tuple[float, ...]:
        return (self.a, self.b, self.c, self.d)


@dataclass(frozen=True)
class RationalKappa:
    """kappa(eps1) = a / (1 + b * eps1^c), saturating at a for eps1 -> 0.

    Monotone decreasing on eps1 > 0 when b >= 0 and c > 0; the search may
    still visit coefficients outside that region, in which case downstream
    feasibility checks reject the poles.
    """

    a: float
    b: float
    c: float

    label = "rational"

    @property
    def coefficients(self) -> tuple[float, ...]:
        return (self.a, self.b, self.c)


KappaModel = Union[CubicKappa, RationalKappa]


def eval_kappa(model: KappaModel, eps1: float) -> float:
    """Evaluate the degradation function at a principal tensile strain."""
    if isinstance(model, CubicKappa):
        x = eps1 * 1000.0
        return ((model.a * x + model.b) * x + model.c) * x + model.d
    if eps1 == 0.0:
        if model.c > 0.0:
            return model.a
        if model.c == 0.0:
            denom = 1.0 + model.b
            return model.a / denom if denom != 0.0 else math.inf
        return 0.0 if model.b != 0.0 else model.a  # eps1^c -> inf for c < 0
    denom = 1.0 + model.b * eps1 ** model.c
    if denom == 0.0:
        return math.inf
    return model.a / denom


@dataclass(frozen=True)
class HypothesisTriple:
    """Assumed regime (``"E"`` or ``"P"``) per reinforcement group."""

    regime_x1: str
    regime_x2: str
    regime_t: str

    @classmethod
    def from_string(cls, text: str) -> "HypothesisTriple":
        if len(text) != 3 or any(ch not in "EP" for ch in text):
            raise InputError(f"hypothesis must be 3 letters over {{E,P}}, got {text!r}")
        return cls(text[0], text[1], text[2])

    def __str__(self) -> str:
        return self.regime_x1 + self.regime_x2 + self.regime_t


@dataclass(frozen=True)
class KappaLimits:
    """Admissible upper bounds on kappa per reinforcement and overall."""

    klim_x1: float
    klim_x2: Optional[float]  # None when there is no upper reinforcement
    klim_t: float
    klim1: float
    klim2_x1: float
    klim2_x2: Optional[float]
    klim2_t: float
    klim2: float


def _klim2_factor(eps_y: float) -> float:
    return (4500.0 * eps_y + (1.0 + 1500.0 * eps_y) ** 1.5 - 1.0) / (6750.0 * eps_y)


def kappa_limits(spec: Specimen, mat: DerivedMaterial) -> KappaLimits:
    """Screening bounds: klim = As fy / (alpha Ac fct), tightened by klim2.

    Upper-reinforcement entries are skipped when alpha2 = 0 and the overall
    minima are taken over the defined groups only.
    """

    def klim(As, fy, alpha_i, Ac):
        denom = alpha_i * Ac * spec.fctm
        if denom == 0:
            raise InputError(f"specimen {spec.name!r}: zero denominator in kappa limit")
        return As * fy / denom

    klim_x1 = klim(spec.As_x1, spec.fy_x1, spec.alpha1, spec.Ac_x1)
    klim_t = klim(spec.As_t, spec.fy_t, spec.alpha_t, spec.Ac_t)
    klim2_x1 = klim_x1 * _klim2_factor(mat.eps_y_x1)
    klim2_t = klim_t * _klim2_factor(mat.eps_y_t)
    if spec.alpha2 != 0:
        klim_x2 = klim(spec.As_x2, spec.fy_x2, spec.alpha2, spec.Ac_x2)
        klim2_x2 = klim_x2 * _klim2_factor(mat.eps_y_x2)
        klim1 = min(klim_t, klim_x1, klim_x2)
        klim2 = min(klim2_t, klim2_x1, klim2_x2)
    else:
        klim_x2 = None
        klim2_x2 = None
        klim1 = min(klim_t, klim_x1)
        klim2 = min(klim2_t, klim2_x1)
    return KappaLimits(
        klim_x1=klim_x1, klim_x2=klim_x2, klim_t=klim_t, klim1=klim1,
        klim2_x1=klim2_x1, klim2_x2=klim2_x2, klim2_t=klim2_t, klim2=klim2,
    )


def eps_max(
    fy: float,
    As: float,
    Ac: float,
    alpha_i: float,
    fct: float,
    kappa: float,
    Es: float = ES,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> float:
    """Apparent yield strain: fixed point of e = fy/Es - k Ac a fct / (Es As (1+sqrt(500 e))).

    Starts from fy/Es; with kappa = 0 that start is already the exact fixed
    point. Divergence or a negative iterate raises EpsMaxError.
    """
    correction = kappa * Ac * alpha_i * fct / (Es * As)
    eps = fy / Es
    for _ in range(max_iter):
        if eps < 0.0:
            raise EpsMaxError("apparent yield strain left the physical range")
        nxt = fy / Es - correction / (1.0 + math.sqrt(500.0 * eps))
        if abs(nxt - eps) <= tol:
            if nxt < 0.0:
                raise EpsMaxError("apparent yield strain left the physical range")
            return nxt
        eps = nxt
    raise EpsMaxError("apparent yield strain iteration did not converge")


@dataclass(frozen=True)
class StateVariables:
    """Full substitution-chain state at one (eps1, theta) point."""

    sigma1: float  # principal concrete tension, MPa
    sigma2: float  # principal concrete compression, MPa
    f2max: float  # compression cap, MPa
    eps2: float
    eps_t: float
    eps_x: float
    lambda_coef: float  # eps2 = lambda_coef * eps_c
    sigma_s_x1: float
    sigma_s_x2: float
    sigma_s_t: float
    kappa: float


def _steel_stress(regime, strain, fy, kappa, Ac, As, alpha_i, fct):
    if regime == "E":
        return ES * strain
    if strain < 0.0:
        raise ChainInfeasibleError("negative strain in tension-stiffened branch")
    return fy - kappa * (Ac / As) * alpha_i * fct / (1.0 + math.sqrt(500.0 * strain))


def state_chain(
    eps1: float,
    theta: float,
    spec: Specimen,
    mat: DerivedMaterial,
    kappa: float,
    hyp: HypothesisTriple,
) -> StateVariables:
    """Propagate (eps1, theta) through the reduced model.

    sigma1 follows the cracked tension-stiffening branch, sigma2 closes the
    diagonal equilibrium, eps2 inverts the parabolic compression law, and the
    strain compatibility relations give eps_t and eps_x. Steel stresses branch
    on the assumed regime: elastic Es*eps, or plastic fy minus the kappa-scaled
    tension-stiffening transfer. Raises ChainInfeasibleError when the chain has
    no real value (crushing sigma2 > f2max, negative radicands, non-finite
    intermediates).
    """
    if eps1 < 0.0:
        raise ChainInfeasibleError("eps1 < 0")
    if not (0.0 < theta < math.pi / 2):
        raise ChainInfeasibleError("theta outside (0, pi/2)")
    if not math.isfinite(kappa):
        raise ChainInfeasibleError("non-finite kappa")

    sigma1 = spec.alpha * spec.fctm / (1.0 + math.sqrt(500.0 * eps1))
    tan_t = math.tan(theta)
    sigma2 = (tan_t + 1.0 / tan_t) * spec.V / (spec.z * spec.bw) - sigma1
    f2max = spec.fc * min(1.0, 1.0 / (0.8 + 170.0 * eps1))
    ratio = sigma2 / f2max
    if ratio > 1.0:
        raise ChainInfeasibleError("sigma2 exceeds f2max (crushing)")
    lambda_coef = 1.0 - math.sqrt(1.0 - ratio)
    eps2 = lambda_coef * spec.eps_c
    t2 = tan_t * tan_t
    eps_t = (eps2 * t2 + eps1) / (t2 + 1.0)
    eps_x = eps1 + eps2 - eps_t

    sigma_s_x1 = _steel_stress(
        hyp.regime_x1, eps_x, spec.fy_x1, kappa, spec.Ac_x1, spec.As_x1,
        spec.alpha1, spec.fctm,
    )
    if spec.alpha2 == 0:
        sigma_s_x2 = 0.0
    else:
        sigma_s_x2 = _steel_stress(
            hyp.regime_x2, eps_x, spec.fy_x2, kappa, spec.Ac_x2, spec.As_x2,
            spec.alpha2, spec.fctm,
        )
    sigma_s_t = _steel_stress(
        hyp.regime_t, eps_t, spec.fy_t, kappa, spec.Ac_t, spec.As_t,
        spec.alpha_t, spec.fctm,
    )

    state = StateVariables(
        sigma1=sigma1, sigma2=sigma2, f2max=f2max, eps2=eps2, eps_t=eps_t,
        eps_x=eps_x, lambda_coef=lambda_coef, sigma_s_x1=sigma_s_x1,
        sigma_s_x2=sigma_s_x2, sigma_s_t=sigma_s_t, kappa=kappa,
    )
    for value in (sigma1, sigma2, eps2, eps_t, eps_x,
                  sigma_s_x1, sigma_s_x2, sigma_s_t):
        if not math.isfinite(value):
            raise ChainInfeasibleError("non-finite chain value")
    return state


def omega_psi(
    eps1: float, theta: float, lambda_coef: float, eps_c: float
) -> tuple[float, float]:
    """Behaviour coefficients for longitudinal/transverse reinforcement.

    Omega = (eps1 tan^2 + lambda eps_c) / (1 + tan^2)
    Psi   = (eps1 + lambda eps_c tan^2) / (1 + tan^2)

    Kept as an independent formulation of the compatibility strains for
    cross-checking the substitution chain (eps_x == Omega, eps_t == Psi).
    """
    t2 = math.tan(theta) ** 2
    omega = (eps1 * t2 + lambda_coef * eps_c) / (1.0 + t2)
    psi = (eps1 + lambda_coef * eps_c * t2) / (1.0 + t2)
    return omega, psi


def residuals_from_state(
    spec: Specimen, theta: float, state: StateVariables
) -> tuple[float, float]:
    """Equilibrium residuals given an already-computed chain state (units N)."""
    tan_t = math.tan(theta)
    r1 = (
        spec.As_x1 * state.sigma_s_x1
        + spec.As_x2 * state.sigma_s_x2
        - spec.V / tan_t
        + state.sigma1 * spec.bw * spec.z
    )
    sin_t = math.sin(theta)
    cos_t = math.cos(theta)
    r2 = state.sigma_s_t * spec.As_t - (
        state.sigma2 * sin_t * sin_t - state.sigma1 * cos_t * cos_t
    ) * spec.bw * spec.s
    return r1, r2


def residuals(
    eps1: float,
    theta: float,
    spec: Specimen,
    mat: DerivedMaterial,
    kappa: float,
    hyp: HypothesisTriple,
) -> tuple[float, float]:
    """Longitudinal (r1) and transverse (r2) equilibrium residuals at a point."""
    state = state_chain(eps1, theta, spec, mat, kappa, hyp)
    return residuals_from_state(spec, theta, state)


@dataclass(frozen=True)
class SolveResult:
    """A converged, in-range root of the reduced system."""

    eps1: float
    theta: float
    state: StateVariables
    sigma_st_model: float  # model stirrup stress at the root, MPa
    consistent: bool  # strains verify the assumed regimes


@dataclass(frozen=True)
class NewtonSettings:
    tol_abs: float = 1e-6  # residual units (N)
    max_iter: int = 10000
    max_halvings: int = 30
    fd_step: float = 1e-8  # relative central-difference step


DEFAULT_NEWTON = NewtonSettings()


def _probe(residual, eps1, theta):
    if not (0.0 < eps1 < _EPS1_HI) or not (_THETA_LO < theta < _THETA_HI):
        return None
    try:
        return residual(eps1, theta)
    except ChainInfeasibleError:
        return None


def newton_2d(
    residual,
    eps1_0: float,
    theta_0: float,
    settings: NewtonSettings = DEFAULT_NEWTON,
) -> Optional[tuple[float, float]]:
    """Damped Newton-Raphson on a 2-vector residual; None when no root found.

    The Jacobian is formed by central differences with a relative step; each
    Newton step is halved (up to ``max_halvings`` times) until the residual
    norm decreases. Trial points that leave the feasible chain simply count
    as failed halvings.
    """
    x0, x1 = eps1_0, theta_0
    r = _probe(residual, x0, x1)
    if r is None:
        return None
    for _ in range(settings.max_iter):
        if abs(r[0]) < settings.tol_abs and abs(r[1]) < settings.tol_abs:
            return x0, x1
        h0 = settings.fd_step * max(abs(x0), 1.0)
        h1 = settings.fd_step * max(abs(x1), 1.0)
        rp0 = _probe(residual, x0 + h0, x1)
        rm0 = _probe(residual, x0 - h0, x1)
        rp1 = _probe(residual, x0, x1 + h1)
        rm1 = _probe(residual, x0, x1 - h1)
        if None in (rp0, rm0, rp1, rm1):
            return None
        j00 = (rp0[0] - rm0[0]) / (2.0 * h0)
        j10 = (rp0[1] - rm0[1]) / (2.0 * h0)
        j01 = (rp1[0] - rm1[0]) / (2.0 * h1)
        j11 = (rp1[1] - rm1[1]) / (2.0 * h1)
        det = j00 * j11 - j01 * j10
        if det == 0.0 or not math.isfinite(det):
            return None
        d0 = -(j11 * r[0] - j01 * r[1]) / det
        d1 = -(j00 * r[1] - j10 * r[0]) / det
        norm = math.hypot(r[0], r[1])
        step = 1.0
        accepted = False
        for _ in range(settings.max_halvings + 1):
            xt0, xt1 = x0 + step * d0, x1 + step * d1
            rt = _probe(residual, xt0, xt1)
            if rt is not None and math.hypot(rt[0], rt[1]) < norm:
                x0, x1, r = xt0, xt1, rt
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return None
    if abs(r[0]) < settings.tol_abs and abs(r[1]) < settings.tol_abs:
        return x0, x1
    return None


def _finite_kappa(model: KappaModel, eps1: float) -> float:
    k = eval_kappa(model, eps1)
    if not math.isfinite(k):
        raise ChainInfeasibleError("non-finite kappa")
    return k


def check_consistency(
    spec: Specimen,
    mat: DerivedMaterial,
    hyp: HypothesisTriple,
    kappa: float,
    state: StateVariables,
) -> bool:
    """Do the chain strains respect the assumed regime of every reinforcement?

    Elastic demands strain <= eps_max, plastic demands strain > eps_max, with
    eps_max from the apparent-yield fixed point at this kappa. An undefined
    eps_max counts as inconsistent.
    """
    groups = [
        (hyp.regime_x1, state.eps_x, spec.fy_x1, spec.As_x1, spec.Ac_x1, spec.alpha1),
    ]
    if spec.alpha2 != 0:
        groups.append(
            (hyp.regime_x2, state.eps_x, spec.fy_x2, spec.As_x2, spec.Ac_x2, spec.alpha2)
        )
    groups.append(
        (hyp.regime_t, state.eps_t, spec.fy_t, spec.As_t, spec.Ac_t, spec.alpha_t)
    )
    for regime, strain, fy, As, Ac, alpha_i in groups:
        try:
            limit = eps_max(fy, As, Ac, alpha_i, spec.fctm, kappa)
        except EpsMaxError:
            return False
        if regime == "E":
            if strain > limit:
                return False
        else:
            if strain <= limit:
                return False
    return True


def eps1_seed_grid(spec: Specimen, mat: DerivedMaterial, n_seeds: int) -> list[float]:
    """Equispaced eps1 starting points from the cracking strain upward.

    The span adds the transverse yield strain to the smaller longitudinal
    yield strain (upper reinforcement ignored when absent).
    """
    if n_seeds < 2:
        raise ConfigError(f"need at least 2 eps1 seeds, got {n_seeds}")
    if spec.alpha2 != 0:
        long_y = min(mat.eps_y_x1, mat.eps_y_x2)
    else:
        long_y = mat.eps_y_x1
    span = long_y + mat.eps_y_t - mat.eps_ctm
    return [mat.eps_ctm + span * j / (n_seeds - 1) for j in range(n_seeds)]


def solve_attempt(
    spec: Specimen,
    mat: DerivedMaterial,
    hyp: HypothesisTriple,
    model: KappaModel,
    eps1_seed: float,
    theta_seed: float,
    klim2: float,
    settings: NewtonSettings = DEFAULT_NEWTON,
) -> Optional[SolveResult]:
    """One Newton run from one seed pair; None if no acceptable root.

    A converged root is discarded when eps1 < eps_ctm or when the candidate
    kappa exceeds the screening bound klim2. Roots that survive are annotated
    with the regime-consistency verdict.
    """

    def residual(e, t):
        return residuals(e, t, spec, mat, _finite_kappa(model, e), hyp)

    root = newton_2d(residual, eps1_seed, theta_seed, settings)
    if root is None:
        return None
    e, t = root
    kap = eval_kappa(model, e)
    if not math.isfinite(kap) or e < mat.eps_ctm or kap > klim2:
        return None
    try:
        state = state_chain(e, t, spec, mat, kap, hyp)
    except ChainInfeasibleError:
        return None
    consistent = check_consistency(spec, mat, hyp, kap, state)
    return SolveResult(e, t, state, state.sigma_s_t, consistent)


def solve_hypothesis(
    spec: Specimen,
    mat: DerivedMaterial,
    hyp: HypothesisTriple,
    model: KappaModel,
    theta_seed: float = math.radians(30.0),
    n_eps_seeds: int = 3,
    klims: Optional[KappaLimits] = None,
    settings: NewtonSettings = DEFAULT_NEWTON,
) -> Optional[SolveResult]:
    """Best consistent root over the eps1 seed grid, or None.

    "Best" means the smallest squared gap between model and experimental
    stirrup stress, mirroring how the fitness aggregates attempts.
    """
    if klims is None:
        klims = kappa_limits(spec, mat)
    best: Optional[SolveResult] = None
    best_gap = math.inf
    for seed in eps1_seed_grid(spec, mat, n_eps_seeds):
        result = solve_attempt(spec, mat, hyp, model, seed, theta_seed,
                               klims.klim2, settings)
        if result is None or not result.consistent:
            continue
        gap = (result.sigma_st_model - spec.sigma_st_exp) ** 2
        if gap < best_gap:
            best, best_gap = result, gap
    return best
