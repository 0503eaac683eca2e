"""MAC-stage physical layer between the two sources and the relay.

Covers all three schemes: the proposed two-relay-antenna Alamouti scheme
(STBC_NR2), its single-relay-antenna variant (STBC_NR1), and the SISO
baseline.  For the STBC schemes each source precodes its Alamouti block with a
diagonal matrix built from the *other* source's channel, the relay superposes
both transmissions, and maximum-ratio combining collapses every coded symbol
to a real observation

    y = xi_a * x_a + xi_b * x_b + noise,    var(noise) = alpha * sigma_n^2

with the four noise-free points s = [xi_a+xi_b, -xi_a+xi_b, xi_a-xi_b,
-xi_a-xi_b].  The SISO baseline is phase-precompensated BPSK superposition
(xi = |h|, alpha = 1) feeding the identical observation model.

Per-block scalar operations are the contract surface; ``simulate_codeword``
is the vectorized whole-codeword path used by the Monte-Carlo harness and is
tested to match the scalar chain sample-for-sample.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .fading import BlockChannel, FadingParams, sample_complex_coeffs


class Scheme(enum.Enum):
    STBC_NR2 = "stbc2"
    STBC_NR1 = "stbc1"
    SISO = "siso"


def noise_sigma_n2(eb_n0_db: float, code_rate: float) -> float:
    """Per-dimension noise variance for unit per-source symbol energy.

    Energy per information bit is 1/code_rate, so N0 = (1/R) 10^(-EbN0/10)
    and sigma_n^2 = N0 / 2.
    """
    return 10.0 ** (-eb_n0_db / 10.0) / (2.0 * code_rate)


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme selection plus fading and operating-point parameters."""

    scheme: Scheme
    fading: FadingParams
    eb_n0_db: float
    code_rate: float = 0.8

    def __post_init__(self):
        if self.scheme is Scheme.SISO:
            if self.fading.n_t != 1 or self.fading.n_r != 1:
                raise ValueError("SISO requires n_t = n_r = 1")
        else:
            want_nr = 2 if self.scheme is Scheme.STBC_NR2 else 1
            if self.fading.n_t != 2 or self.fading.n_r != want_nr:
                raise ValueError(
                    f"{self.scheme.value} requires n_t = 2, n_r = {want_nr}"
                )
        if not 0 < self.code_rate <= 1:
            raise ValueError("code_rate must be in (0, 1]")

    @property
    def sigma_n2(self) -> float:
        return noise_sigma_n2(self.eb_n0_db, self.code_rate)


def make_scheme_config(scheme: Scheme, m: float, eb_n0_db: float,
                       code_rate: float = 0.8, omega: float = 1.0) -> SchemeConfig:
    """SchemeConfig with antenna counts consistent with the scheme."""
    if scheme is Scheme.SISO:
        fp = FadingParams(m=m, omega=omega, n_r=1, n_t=1)
    else:
        fp = FadingParams(m=m, omega=omega, n_r=2 if scheme is Scheme.STBC_NR2 else 1, n_t=2)
    return SchemeConfig(scheme=scheme, fading=fp, eb_n0_db=eb_n0_db, code_rate=code_rate)


@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    """Combined gains, noise scale, and the 4-point noise-free constellation."""

    xi_a: float
    xi_b: float
    alpha: float
    s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "s", np.asarray(self.s, dtype=np.float64))

    @property
    def u_g(self) -> float:
        """Mean of the initial primary LLR per unit sigma_n^2 times sigma_n^2.

        Divide by sigma_n^2 to get the actual mean: (|s0|-|s1|)^2 / (2 alpha).
        """
        return (abs(self.s[0]) - abs(self.s[1])) ** 2 / (2.0 * self.alpha)


def _four_points(xi_a: float, xi_b: float) -> np.ndarray:
    return np.array([xi_a + xi_b, -xi_a + xi_b, xi_a - xi_b, -xi_a - xi_b])


def normalization_factors(bc: BlockChannel):
    """Per-relay-antenna precoder normalizations (eta_a[k], eta_b[k]).

    eta_a[k] = 1/sqrt(sum_mu |h_b,mu[k]|^2) keeps each source's per-slot
    transmit energy at 1; eta_b symmetric.
    """
    pw = (np.abs(bc.h) ** 2).sum(axis=1)  # (2 sources, n_r)
    if (pw == 0).any():
        raise ValueError("zero-magnitude channel coefficient")
    eta_a = 1.0 / np.sqrt(pw[1])
    eta_b = 1.0 / np.sqrt(pw[0])
    return eta_a, eta_b


def simulate_mac_block(bc: BlockChannel, x_a, x_b, sigma_n2: float,
                       rng: np.random.Generator | None = None,
                       noise: np.ndarray | None = None) -> np.ndarray:
    """Received samples r[k, t] for one Alamouti block of two BPSK symbols.

    Each source maps its two symbols onto [[x1, -x2*], [x2, x1*]], applies its
    diagonal precoder for relay antenna k, and the relay superposes both plus
    complex noise.  Pass ``noise`` (shape (n_r, 2)) to override the random
    draw; ``noise=0`` hands back the noise-free block.
    """
    x_a = np.asarray(x_a, dtype=np.complex128)
    x_b = np.asarray(x_b, dtype=np.complex128)
    eta_a, eta_b = normalization_factors(bc)
    n_r = bc.n_r
    if noise is None:
        scale = np.sqrt(sigma_n2)
        noise = rng.normal(0.0, scale, (n_r, 2)) + 1j * rng.normal(0.0, scale, (n_r, 2))
    else:
        noise = np.broadcast_to(np.asarray(noise, dtype=np.complex128), (n_r, 2))

    xmat_a = np.array([[x_a[0], -np.conj(x_a[1])], [x_a[1], np.conj(x_a[0])]])
    xmat_b = np.array([[x_b[0], -np.conj(x_b[1])], [x_b[1], np.conj(x_b[0])]])
    r = np.empty((n_r, 2), dtype=np.complex128)
    for k in range(n_r):
        h_a_row = bc.h[0, :, k]
        h_b_row = bc.h[1, :, k]
        p_a = np.diag(eta_a[k] * h_b_row)
        p_b = np.diag(eta_b[k] * h_a_row)
        r[k] = h_a_row @ p_a @ xmat_a + h_b_row @ p_b @ xmat_b + noise[k]
    return r


def mrc_combine(bc: BlockChannel, r: np.ndarray):
    """Combiner outputs (y_1, y_2) from the received block.

    Weights use the product channels h_mu[k] = h_a,mu[k] * h_b,mu[k]; the
    Alamouti structure cancels all cross terms, leaving a purely real signal
    part xi_a x_a,j + xi_b x_b,j in each output.
    """
    h = bc.h[0] * bc.h[1]  # (n_t, n_r) product channels
    h1, h2 = h[0], h[1]
    y1 = np.sum(np.conj(h1) * r[:, 0] + h2 * np.conj(r[:, 1]))
    y2 = np.sum(np.conj(h2) * r[:, 0] - h1 * np.conj(r[:, 1]))
    return complex(y1), complex(y2)


def effective_params(bc: BlockChannel, scheme: Scheme) -> EffectiveChannel:
    """Per-symbol combined gains (xi_a, xi_b), noise scale alpha, and points s."""
    if scheme is Scheme.SISO:
        xi_a = float(np.abs(bc.h[0, 0, 0]))
        xi_b = float(np.abs(bc.h[1, 0, 0]))
        if xi_a == 0.0 or xi_b == 0.0:
            raise ValueError("degenerate zero channel")
        return EffectiveChannel(xi_a, xi_b, 1.0, _four_points(xi_a, xi_b))
    eta_a, eta_b = normalization_factors(bc)
    h = bc.h[0] * bc.h[1]
    gains = (np.abs(h) ** 2).sum(axis=0)  # per relay antenna
    alpha = float(gains.sum())
    xi_a = float((gains * eta_a).sum())
    xi_b = float((gains * eta_b).sum())
    if alpha == 0.0 or xi_a == 0.0 or xi_b == 0.0:
        raise ValueError("degenerate zero channel")
    return EffectiveChannel(xi_a, xi_b, alpha, _four_points(xi_a, xi_b))


def channel_message(ec: EffectiveChannel, y: float, sigma_n2: float) -> np.ndarray:
    """Normalized 4-ary symbol likelihoods g_mu for a real observation y.

    g_mu proportional to exp(-(y - s_mu)^2 / (2 alpha sigma_n^2)); the
    max-exponent shift guards overflow and leaves the result unchanged.
    """
    v = 2.0 * ec.alpha * sigma_n2
    expo = -((y - ec.s) ** 2) / v
    expo -= expo.max()
    g = np.exp(expo)
    return g / g.sum()


def _ln_2cosh(t):
    """log(e^t + e^-t), overflow-safe."""
    t = np.abs(t)
    return t + np.log1p(np.exp(-2.0 * t))


def init_llr_exact(ec: EffectiveChannel, y: float, sigma_n2: float) -> float:
    """Initial primary LLR ln((g0+g3)/(g1+g2)) in closed stabilized form."""
    v = ec.alpha * sigma_n2
    s0, s1 = ec.s[0], ec.s[1]
    return float(
        (s1 ** 2 - s0 ** 2) / (2.0 * v)
        + _ln_2cosh(s0 * y / v)
        - _ln_2cosh(s1 * y / v)
    )


def init_llr_simplified(ec: EffectiveChannel, y: float, sigma_n2: float) -> float:
    """High-SNR reduction of the initial primary LLR."""
    v = ec.alpha * sigma_n2
    s0, s1 = ec.s[0], ec.s[1]
    return float(
        (s1 ** 2 - s0 ** 2) / (2.0 * v)
        + (abs(s0 * y) - abs(s1 * y)) / v
    )


# ---------------------------------------------------------------------------
# vectorized whole-codeword transmission
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CodewordObservation:
    """Real combiner outputs and per-symbol effective-channel arrays."""

    y: np.ndarray
    xi_a: np.ndarray
    xi_b: np.ndarray
    alpha: np.ndarray


def draw_effective_gains(cfg: SchemeConfig, count: int, rng: np.random.Generator,
                         quasi_static: bool = False):
    """(xi_a, xi_b, alpha) for ``count`` coded symbols.

    STBC schemes draw one independent channel per Alamouti block (two
    symbols); SISO draws per symbol.  ``quasi_static`` holds a single draw for
    the whole codeword.
    """
    fp = cfg.fading
    if cfg.scheme is Scheme.SISO:
        ndraw = 1 if quasi_static else count
        h = sample_complex_coeffs(fp, (2, ndraw), rng)
        xi_a, xi_b = np.abs(h[0]), np.abs(h[1])
        alpha = np.ones(ndraw)
    else:
        nblk = 1 if quasi_static else (count + 1) // 2
        h = sample_complex_coeffs(fp, (2, 2, fp.n_r, nblk), rng)
        pw = (np.abs(h) ** 2).sum(axis=1)          # (2, n_r, nblk)
        eta_a, eta_b = 1.0 / np.sqrt(pw[1]), 1.0 / np.sqrt(pw[0])
        gains = (np.abs(h[0] * h[1]) ** 2).sum(axis=0)  # (n_r, nblk)
        alpha = gains.sum(axis=0)
        xi_a = (gains * eta_a).sum(axis=0)
        xi_b = (gains * eta_b).sum(axis=0)
        xi_a, xi_b, alpha = (np.repeat(v, 2) for v in (xi_a, xi_b, alpha))
    if quasi_static:
        xi_a, xi_b, alpha = (np.repeat(v, count)[:count] for v in (xi_a, xi_b, alpha))
    return xi_a[:count], xi_b[:count], alpha[:count]


def draw_independent_gains(cfg: SchemeConfig, count: int, rng: np.random.Generator):
    """(xi_a, xi_b, alpha) for ``count`` mutually independent channel draws.

    Unlike :func:`draw_effective_gains` there is no Alamouti-block pairing;
    every draw is a fresh realization (Monte-Carlo averaging for analysis).
    """
    fp = cfg.fading
    if cfg.scheme is Scheme.SISO:
        h = sample_complex_coeffs(fp, (2, count), rng)
        return np.abs(h[0]), np.abs(h[1]), np.ones(count)
    h = sample_complex_coeffs(fp, (2, 2, fp.n_r, count), rng)
    pw = (np.abs(h) ** 2).sum(axis=1)
    eta_a, eta_b = 1.0 / np.sqrt(pw[1]), 1.0 / np.sqrt(pw[0])
    gains = (np.abs(h[0] * h[1]) ** 2).sum(axis=0)
    return (gains * eta_a).sum(axis=0), (gains * eta_b).sum(axis=0), gains.sum(axis=0)


def simulate_codeword(cfg: SchemeConfig, x_a: np.ndarray, x_b: np.ndarray,
                      rng: np.random.Generator,
                      quasi_static: bool = False) -> CodewordObservation:
    """Transmit two BPSK codewords through the MAC stage, one symbol per entry.

    Equivalent to running simulate_mac_block + mrc_combine block by block for
    the STBC schemes (channels drawn per Alamouti block) but vectorized: the
    combiner output reduces to y = xi_a x_a + xi_b x_b + Re(noise) with noise
    variance alpha sigma_n^2 per symbol, with fresh channel draws shared by
    the two symbols of each block.
    """
    n = x_a.shape[0]
    if x_b.shape[0] != n:
        raise ValueError("codeword length mismatch")
    xi_a, xi_b, alpha = draw_effective_gains(cfg, n, rng, quasi_static)
    noise = rng.normal(0.0, 1.0, n) * np.sqrt(alpha * cfg.sigma_n2)
    y = xi_a * x_a + xi_b * x_b + noise
    return CodewordObservation(y=y, xi_a=xi_a, xi_b=xi_b, alpha=alpha)


def channel_messages(obs: CodewordObservation, sigma_n2: float,
                     punctured: np.ndarray) -> np.ndarray:
    """(n, 4) normalized symbol likelihoods; punctured entries uniform."""
    s0 = obs.xi_a + obs.xi_b
    s1 = -obs.xi_a + obs.xi_b
    svals = np.stack([s0, s1, -s1, -s0], axis=1)
    expo = -((obs.y[:, None] - svals) ** 2) / (2.0 * obs.alpha * sigma_n2)[:, None]
    expo -= expo.max(axis=1, keepdims=True)
    g = np.exp(expo)
    g /= g.sum(axis=1, keepdims=True)
    g[punctured] = 0.25
    return g


def channel_llrs(obs: CodewordObservation, sigma_n2: float, punctured: np.ndarray,
                 simplified: bool = True) -> np.ndarray:
    """(n,) initial primary LLRs; punctured entries 0."""
    v = obs.alpha * sigma_n2
    s0 = obs.xi_a + obs.xi_b
    s1 = np.abs(obs.xi_b - obs.xi_a)
    if simplified:
        llr = (s1 ** 2 - s0 ** 2) / (2.0 * v) + (s0 - s1) * np.abs(obs.y) / v
    else:
        llr = (
            (s1 ** 2 - s0 ** 2) / (2.0 * v)
            + _ln_2cosh(s0 * obs.y / v)
            - _ln_2cosh(s1 * obs.y / v)
        )
    llr[punctured] = 0.0
    return llr
