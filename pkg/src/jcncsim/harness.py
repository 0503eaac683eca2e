"""Monte-Carlo BER sweeps, threshold tables, LLR-PDF diagnostics, CSV output.

Every run is a pure function of (config, seed): per-block random streams are
keyed by (seed, point index, block index) through ``numpy.random.SeedSequence``
and results are reduced in block-index order, so worker count never changes
the emitted numbers.
"""

from __future__ import annotations

import dataclasses
import io
import multiprocessing
from dataclasses import dataclass

import numpy as np

from . import analysis, decoder, protocode, relaylink
from .relaylink import Scheme

_SCHEME_BY_NAME = {s.value: s for s in Scheme}
DEFAULT_MAX_ERRORS = 200


@dataclass
class RunConfig:
    """Configuration of a BER sweep (defaults match the CLI)."""

    code_path: str
    scheme: str = "stbc2"
    m_values: tuple = (2.0,)
    ebn0_start: float = 0.0
    ebn0_stop: float = 3.0
    ebn0_step: float = 0.5
    max_blocks: int = 10_000
    max_errors: int = DEFAULT_MAX_ERRORS
    t_max: int = 100
    decoder: str = "full"
    seed: int = 1
    workers: int = 1
    out: str | None = None
    quasi_static: bool = False
    lift_factor: int = 100
    lift_seed: int = 1

    def __post_init__(self):
        if self.scheme not in _SCHEME_BY_NAME:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.decoder not in ("full", "simplified"):
            raise ValueError(f"unknown decoder variant {self.decoder!r}")
        if self.max_blocks < 1 or self.max_errors < 1 or self.t_max < 1:
            raise ValueError("stopping criteria must be positive")
        if self.ebn0_step <= 0 or self.ebn0_stop < self.ebn0_start:
            raise ValueError("empty or invalid Eb/N0 grid")

    def grid(self) -> list[float]:
        pts = []
        x = self.ebn0_start
        while x <= self.ebn0_stop + 1e-9:
            pts.append(round(x, 10))
            x += self.ebn0_step
        return pts


@dataclass
class BerRecord:
    eb_n0_db: float
    m: float
    scheme: str
    decoder: str
    info_bit_errors: int
    info_bits: int
    codeword_bit_errors: int
    codeword_bits: int
    block_errors: int
    blocks: int
    avg_iterations: float

    @property
    def info_ber(self) -> float:
        return self.info_bit_errors / self.info_bits if self.info_bits else 0.0

    @property
    def codeword_ber(self) -> float:
        return self.codeword_bit_errors / self.codeword_bits if self.codeword_bits else 0.0


def load_code(path: str, lift_factor: int, lift_seed: int,
              max_retries: int = 8) -> protocode.LiftedCode:
    """Load a protograph file and lift it; retries fresh seeds on a singular
    encoder structure (deterministic retry order)."""
    pg = protocode.load_protograph(path)
    last: Exception | None = None
    for k in range(max_retries):
        try:
            return protocode.lift(pg, lift_factor, lift_seed + k)
        except protocode.EncoderStructureError as exc:
            last = exc
    raise protocode.EncoderStructureError(
        f"no invertible encoder structure in {max_retries} lift seeds"
    ) from last


def _block_rng(seed: int, point_idx: int, block_idx: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, point_idx, block_idx)))


_WORKER_STATE: dict = {}


def simulate_block(code: protocode.LiftedCode, scfg: relaylink.SchemeConfig,
                   variant: str, t_max: int, quasi_static: bool,
                   rng: np.random.Generator):
    """One Monte-Carlo block: draw codewords, transmit, decode the XOR.

    Returns (info_errors, codeword_errors, block_error, iterations).
    """
    u_a = rng.integers(0, 2, code.k).astype(np.uint8)
    u_b = rng.integers(0, 2, code.k).astype(np.uint8)
    c_a = code.encode(u_a)
    c_b = code.encode(u_b)
    c_x = c_a ^ c_b
    x_a = 1.0 - 2.0 * c_a
    x_b = 1.0 - 2.0 * c_b
    obs = relaylink.simulate_codeword(scfg, x_a, x_b, rng, quasi_static)
    punct = code.puncture_mask_
    if variant == "full":
        g = relaylink.channel_messages(obs, scfg.sigma_n2, punct)
        res = decoder.decode(code, g, t_max)
    else:
        # exact initial LLR: the primary-LLR projection of the 4-ary message
        llr = relaylink.channel_llrs(obs, scfg.sigma_n2, punct, simplified=False)
        res = decoder.decode_simplified(code, llr, t_max)
    diff = res.xor_estimate ^ c_x
    info_err = int(diff[code.info_positions].sum())
    cw_err = int(diff.sum())
    return info_err, cw_err, int(cw_err > 0), res.iterations_used


def _init_worker(cfg: RunConfig):
    _WORKER_STATE["code"] = load_code(cfg.code_path, cfg.lift_factor, cfg.lift_seed)
    _WORKER_STATE["cfg"] = cfg


def _run_block(task):
    point_idx, block_idx, m, ebn0 = task
    cfg: RunConfig = _WORKER_STATE["cfg"]
    code = _WORKER_STATE["code"]
    scfg = relaylink.make_scheme_config(
        _SCHEME_BY_NAME[cfg.scheme], m, ebn0,
        code_rate=float(code.protograph.design_rate))
    rng = _block_rng(cfg.seed, point_idx, block_idx)
    return simulate_block(code, scfg, cfg.decoder, cfg.t_max, cfg.quasi_static, rng)


def run_ber_sweep(cfg: RunConfig, code: protocode.LiftedCode | None = None,
                  progress=None) -> list[BerRecord]:
    """Monte-Carlo BER per (m, Eb/N0) grid point.

    A point stops at ``max_blocks`` blocks or once ``max_errors`` info-bit
    errors accumulate, whichever is first, counted in block-index order.
    """
    if code is None:
        code = load_code(cfg.code_path, cfg.lift_factor, cfg.lift_seed)
    records = []
    points = [(m, e) for m in cfg.m_values for e in cfg.grid()]
    for point_idx, (m, ebn0) in enumerate(points):
        scfg = relaylink.make_scheme_config(
            _SCHEME_BY_NAME[cfg.scheme], m, ebn0,
            code_rate=float(code.protograph.design_rate))
        tallies = np.zeros(4, dtype=np.int64)  # info, cw, blocks-with-error, iters
        blocks = 0
        pool = None
        try:
            if cfg.workers > 1:
                ctx = multiprocessing.get_context("fork")
                pool = ctx.Pool(cfg.workers, initializer=_init_worker, initargs=(cfg,))
                tasks = ((point_idx, b, m, ebn0) for b in range(cfg.max_blocks))
                results = pool.imap(_run_block, tasks, chunksize=8)
            else:
                results = (
                    simulate_block(code, scfg, cfg.decoder, cfg.t_max,
                                   cfg.quasi_static, _block_rng(cfg.seed, point_idx, b))
                    for b in range(cfg.max_blocks)
                )
            for res in results:
                tallies += res
                blocks += 1
                if tallies[0] >= cfg.max_errors:
                    break
        finally:
            if pool is not None:
                pool.terminate()
                pool.join()
        rec = BerRecord(
            eb_n0_db=ebn0, m=m, scheme=cfg.scheme, decoder=cfg.decoder,
            info_bit_errors=int(tallies[0]),
            info_bits=blocks * code.k,
            codeword_bit_errors=int(tallies[1]),
            codeword_bits=blocks * code.n,
            block_errors=int(tallies[2]),
            blocks=blocks,
            avg_iterations=float(tallies[3]) / blocks,
        )
        records.append(rec)
        if progress is not None:
            progress(rec)
    return records


# ---------------------------------------------------------------------------
# threshold table / theory curves / LLR PDF
# ---------------------------------------------------------------------------

def run_threshold_table(code_path: str, schemes, m_values, *, seed: int = 1,
                        q_draws: int = 10_000, t_max_p: int = 1000,
                        precision_db: float = 0.01,
                        estimator: str = analysis.DEFAULT_THRESHOLD_ESTIMATOR):
    """find_threshold per (scheme, m) cell; rows ordered as given."""
    pg = protocode.load_protograph(code_path)
    out = []
    for scheme_name in schemes:
        for m in m_values:
            rec = analysis.find_threshold(
                pg, _SCHEME_BY_NAME[scheme_name], m,
                precision_db=precision_db, t_max_p=t_max_p,
                q_draws=q_draws, seed=seed, estimator=estimator)
            out.append(rec)
    return out


def run_theoretical_curve(code_path: str, scheme: str, m: float, grid, *,
                          t_max: int = 100, q_draws: int = 10_000, seed: int = 1,
                          estimator: str = analysis.DEFAULT_THRESHOLD_ESTIMATOR):
    """(eb_n0, all-type BER, info-type BER) rows of the analytic predictor."""
    pg = protocode.load_protograph(code_path)
    rows = []
    for ebn0 in grid:
        _, avg_all, avg_info = analysis.theoretical_ber(
            pg, _SCHEME_BY_NAME[scheme], m, ebn0,
            t_max=t_max, q_draws=q_draws, seed=seed, estimator=estimator)
        rows.append((ebn0, avg_all, avg_info))
    return rows


def run_llr_pdf(code_path: str, scheme: str, m: float, eb_n0_db: float, *,
                samples: int = 1_000_000, bins: int = 200, seed: int = 1,
                realizations: int = 100):
    """Empirical PDF of the initial primary LLR under the all-zero codeword.

    Draws ``realizations`` channel realizations with ``samples`` total noise
    draws spread over them (unpunctured positions only), plus the matching
    per-realization Normal(u, 2u) mixture reference and moment summaries.
    """
    scheme_e = _SCHEME_BY_NAME[scheme]
    scfg = relaylink.make_scheme_config(scheme_e, m, eb_n0_db)
    rng = np.random.default_rng(seed)
    per = max(1, samples // realizations)
    xi_a, xi_b, alpha = relaylink.draw_independent_gains(scfg, realizations, rng)
    v = alpha * scfg.sigma_n2
    s0 = xi_a + xi_b
    s1 = np.abs(xi_b - xi_a)
    u = (s0 - s1) ** 2 / (2.0 * v)

    noise = rng.normal(0.0, 1.0, (realizations, per)) * np.sqrt(v)[:, None]
    y = s0[:, None] + noise
    llr = ((s1 ** 2 - s0 ** 2) / (2.0 * v))[:, None] \
        + ((s0 - s1) / v)[:, None] * np.abs(y)

    ratios = llr.var(axis=1) / llr.mean(axis=1)
    lo, hi = np.quantile(llr, [0.0005, 0.9995])
    hist, edges = np.histogram(llr.ravel(), bins=bins, range=(lo, hi), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    ref = np.zeros_like(centers)
    for uq in u:
        ref += np.exp(-((centers - uq) ** 2) / (4.0 * uq)) / np.sqrt(4.0 * np.pi * uq)
    ref /= realizations
    return {
        "centers": centers,
        "pdf": hist,
        "reference": ref,
        "var_mean_ratio": float(ratios.mean()),
        "ratios": ratios,
        "u_values": u,
        "llr_samples": llr,
    }


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _config_header(cfg) -> str:
    if dataclasses.is_dataclass(cfg):
        items = dataclasses.asdict(cfg).items()
    else:
        items = cfg.items()
    return "# config: " + " ".join(f"{k}={v}" for k, v in items)


def ber_records_csv(records, cfg: RunConfig) -> str:
    buf = io.StringIO()
    buf.write(_config_header(cfg) + "\n")
    fields = [f.name for f in dataclasses.fields(BerRecord)]
    buf.write(",".join(fields) + "\n")
    for r in records:
        buf.write(",".join(repr(getattr(r, f)) for f in fields) + "\n")
    return buf.getvalue()


def threshold_table_csv(records, meta: dict) -> str:
    buf = io.StringIO()
    buf.write(_config_header(meta) + "\n")
    buf.write("scheme,m,threshold_db,iterations_to_converge,channel_draws_q\n")
    for r in records:
        buf.write(f"{r.scheme.value},{r.m!r},{r.threshold_db!r},"
                  f"{r.iterations_to_converge},{r.channel_draws_q}\n")
    return buf.getvalue()


def theory_curve_csv(rows, meta: dict) -> str:
    buf = io.StringIO()
    buf.write(_config_header(meta) + "\n")
    buf.write("eb_n0_db,ber_all_vns,ber_info_vns\n")
    for ebn0, avg_all, avg_info in rows:
        buf.write(f"{ebn0!r},{avg_all!r},{avg_info!r}\n")
    return buf.getvalue()


def llr_pdf_csv(result, meta: dict) -> str:
    buf = io.StringIO()
    buf.write(_config_header(meta) + "\n")
    buf.write(f"# var_mean_ratio={result['var_mean_ratio']!r}\n")
    buf.write("llr,empirical_pdf,reference_pdf\n")
    for c, p, r in zip(result["centers"], result["pdf"], result["reference"]):
        buf.write(f"{c!r},{p!r},{r!r}\n")
    return buf.getvalue()
