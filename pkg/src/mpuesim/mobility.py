"""Handover, beam management and failure procedures of the UE/network control plane.

The elementwise step functions (``a3_step``, ``rlf_step``, ``rach_step``)
work on scalars and arrays alike; :class:`ControlPlane` applies them to a
whole UE batch for one Rx-beamforming approach.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kpi import FAST_HO_WINDOW_MS, REESTABLISHMENT_OUTAGE_MS, SUCCESSFUL_HO_OUTAGE_MS, KpiLedger, book_outage
from .measurement import FilterConfig, MeasurementBank
from .sinr import BatchRlm, batch_sinr

ATTACHED, EXECUTING_HO, REESTABLISHING = 0, 1, 2
IDLE = -1
EVENTS = ("A3_TRIGGER", "HO_CMD", "HO_SUCCESS", "HOF", "RLF", "BFR_OK", "BFR_FAIL", "REEST")


@dataclass(frozen=True)
class ApproachConfig:
    name: str
    serving_link_rx_bf: bool
    pre_ho_refined_acquisition: bool
    l3_uses_refined: bool


APPROACHES = {
    "reference": ApproachConfig("reference", False, False, False),
    "rx1": ApproachConfig("rx1", True, False, False),
    "rx2": ApproachConfig("rx2", True, True, False),
    "rx3": ApproachConfig("rx3", True, True, True),
}


@dataclass(frozen=True)
class MobilityParams:
    dt_ms: int = 10
    ssb_ms: int = 20
    a3_offset_db: float = 2.0
    ttt_ms: int = 80
    gamma_out_db: float = -8.0
    gamma_in_db: float = -6.0
    t_rlf_ms: int = 1000
    t_hof_ms: int = 200
    rach_period_ms: int = 10
    bfd_count: int = 2
    n_batt: int = 4
    t_batt_ms: int = 10
    prep_delay_ms: int = 0
    early_report_ms: int = 0  # after the A3 entering condition first holds
    reest_ms: int = REESTABLISHMENT_OUTAGE_MS
    ho_outage_ms: int = SUCCESSFUL_HO_OUTAGE_MS
    k_b: int = 4
    noise_dbm: float = -84.0
    rlm_window: int = 4


# -- elementwise procedures ---------------------------------------------------


def a3_step(condition, elapsed, dt_ms, ttt_ms):
    """Advance A3 time-to-trigger windows by one evaluation.

    ``elapsed`` is ``IDLE`` (-1) or the ms the entering condition has held.
    The window starts at 0 when the condition first holds, any violation
    resets it, and the event fires once it has held for ``ttt_ms``.
    """
    cond = np.asarray(condition, dtype=bool)
    el = np.asarray(elapsed)
    new = np.where(cond, np.where(el >= 0, el + dt_ms, 0), IDLE)
    return new, cond & (new >= ttt_ms)


def evaluate_a3(serving_l3, neighbor_l3, offset_db, elapsed, dt_ms, ttt_ms=80):
    """A3 state for one neighbour: ``("idle" | "running" | "triggered", elapsed)``."""
    new, fired = a3_step(serving_l3 + offset_db < neighbor_l3, elapsed, dt_ms, ttt_ms)
    new = int(new)
    if bool(fired):
        return "triggered", new
    return ("running" if new >= 0 else "idle"), new


def rlf_step(rlm_db, timer, dt_ms, q_out=-8.0, q_in=-6.0, t_rlf_ms=1000):
    """Advance the RLF timer: start below ``q_out``, cancel above ``q_in``."""
    rlm = np.asarray(rlm_db, dtype=float)
    timer = np.asarray(timer)
    timing = timer >= 0
    start = ~timing & (rlm < q_out)
    keep = timing & ~(rlm > q_in)
    new = np.where(start, 0, np.where(keep, timer + dt_ms, IDLE))
    return new, new >= t_rlf_ms


def rach_step(sinr_db, elapsed, dt_ms, gamma_out=-8.0, t_hof_ms=200, period_ms=10):
    """One time step of CFRA execution; returns ``(elapsed, success, hof)``."""
    el = np.asarray(elapsed) + dt_ms
    attempt = el % period_ms == 0
    success = attempt & (np.asarray(sinr_db) >= gamma_out)
    hof = ~success & (el >= t_hof_ms)
    return el, success, hof


# -- scalar contexts ----------------------------------------------------------


@dataclass
class HandoverContext:
    source_cell: int
    target_cell: int
    prepared_beams: tuple[int, ...]
    refined: tuple[int, int] | None = None  # (panel, rx beam), 1-based
    hof_timer: int = 0
    rach_attempts: int = 0


@dataclass
class RlfContext:
    timer: int = IDLE
    q_out: float = -8.0
    q_in: float = -6.0
    t_rlf_ms: int = 1000

    @property
    def state(self) -> str:
        return "timing" if self.timer >= 0 else "healthy"


def update_rlf(ctx: RlfContext, rlm_db: float, dt_ms: int) -> str:
    """Returns ``"healthy"``, ``"timing"`` or ``"rlf"``."""
    new, fired = rlf_step(rlm_db, ctx.timer, dt_ms, ctx.q_out, ctx.q_in, ctx.t_rlf_ms)
    ctx.timer = int(new)
    if bool(fired):
        return "rlf"
    return ctx.state


@dataclass
class BfrContext:
    serving_beam: int
    detect_count: int = 0
    active: bool = False
    attempts: int = 0
    elapsed: int = 0


def beam_management_step(ctx: BfrContext, l1_beams, sinr_serving_db, params: MobilityParams,
                         attempt_sinr=None) -> str:
    """One L1-period beam management update for a single UE.

    Without an active recovery the serving beam follows the strongest L1
    beam and failure detection counts sub-threshold periods.  During recovery
    ``attempt_sinr`` is the list of SINRs seen at successive attempts.
    Returns ``"tracking"``, ``"bfr_ok"`` or ``"rlf"``.
    """
    best = int(np.argmax(l1_beams)) + 1
    if not ctx.active:
        ctx.serving_beam = best
        ctx.detect_count = ctx.detect_count + 1 if sinr_serving_db < params.gamma_out_db else 0
        if ctx.detect_count < params.bfd_count:
            return "tracking"
        ctx.active, ctx.attempts = True, 0
    for s in attempt_sinr or []:
        ctx.attempts += 1
        if s >= params.gamma_out_db:
            ctx.serving_beam = best
            ctx.active, ctx.detect_count = False, 0
            return "bfr_ok"
        if ctx.attempts >= params.n_batt:
            ctx.active = False
            return "rlf"
    return "tracking"


def prepare_handover(serving_cell: int, target_cell: int, l3_beams_target) -> HandoverContext:
    """Target prepares CFRA on its strongest reported L3 beam (1-based id)."""
    if target_cell == serving_cell:
        raise ValueError("handover target equals the serving cell")
    beam = int(np.argmax(l3_beams_target)) + 1
    return HandoverContext(serving_cell, target_cell, (beam,))


def acquire_refined_target_beam(l1_dr_for_beam) -> tuple[int, int]:
    """Sweep all (panel, Rx beam) pairs against one target Tx beam's CSI-RS."""
    t = np.asarray(l1_dr_for_beam)
    d, r = np.unravel_index(int(np.argmax(t)), t.shape)
    return int(d) + 1, int(r) + 1


def execute_handover(ctx: HandoverContext, sinr_trace_db, params: MobilityParams = MobilityParams()):
    """Run CFRA against a per-step SINR trace of the prepared target link.

    ``sinr_trace_db[k]`` is the SINR ``(k + 1) * dt`` after the HO command.
    Returns ``("success" | "hof", elapsed_ms)``.
    """
    elapsed = 0
    for s in sinr_trace_db:
        elapsed, ok, hof = rach_step(s, elapsed, params.dt_ms, params.gamma_out_db,
                                     params.t_hof_ms, params.rach_period_ms)
        elapsed = int(elapsed)
        ctx.hof_timer = elapsed
        if elapsed % params.rach_period_ms == 0:
            ctx.rach_attempts += 1
        if ok:
            return "success", elapsed
        if hof:
            return "hof", elapsed
    raise ValueError("SINR trace ended before the HO resolved")


def reestablish(l1_cell_quality) -> int:
    """Cell chosen for re-establishment: highest L1 cell quality."""
    return int(np.argmax(l1_cell_quality))


# -- batch state machine ------------------------------------------------------


@dataclass
class EventLog:
    rows: list = field(default_factory=list)

    def add(self, t_ms, ue, event, source=-1, target=-1, beam=-1):
        self.rows.append((int(t_ms), int(ue), event, int(source), int(target), int(beam)))


class ControlPlane:
    """Per-approach control state of every UE.

    Call :meth:`step` once per time step with the raw RSRP tensor
    ``(U, C, B, Q)``; on L1 instants also pass the L1 tables.
    """

    def __init__(self, approach: ApproachConfig, params: MobilityParams, fcfg: FilterConfig,
                 n_ue: int, n_cells: int, refined_mask: np.ndarray, t_fh_ms: int = FAST_HO_WINDOW_MS):
        self.approach = approach
        self.p = params
        self.n_ue = n_ue
        self.n_cells = n_cells
        self.refined = np.asarray(refined_mask, dtype=bool)
        self.serving_allowed = self.refined if approach.serving_link_rx_bf else ~self.refined
        l3_allowed = self.refined if approach.l3_uses_refined else ~self.refined
        self.bank = MeasurementBank(fcfg, n_ue, l3_allowed)
        self.ledger = KpiLedger(n_ue, t_fh_ms=t_fh_ms)
        self.events = EventLog()

        u, c = n_ue, n_cells
        self.state = np.full(u, ATTACHED)
        self.serving = np.full(u, -1)
        self.b0 = np.zeros(u, dtype=int)
        self.q0 = np.zeros(u, dtype=int)
        self.a3 = np.full((u, c), IDLE)
        self.acq_beam = np.full((u, c), -1)
        self.acq_q = np.full((u, c), -1)
        self.acq_ready = np.full((u, c), -1)
        self.cmd_at = np.full(u, -1)
        self.cmd_target = np.full(u, -1)
        self.ho_target = np.full(u, -1)
        self.ho_beam = np.full(u, -1)
        self.ho_q = np.full(u, -1)
        self.ho_refine_at = np.full(u, -1)
        self.ho_elapsed = np.zeros(u, dtype=int)
        self.ho_cmd_time = np.zeros(u, dtype=int)
        self.rlf_timer = np.full(u, IDLE)
        self.rlm = BatchRlm(u, params.rlm_window)
        self.l1_period_ms = fcfg.omega * params.dt_ms
        self.bfd = np.zeros(u, dtype=int)
        self.bfr_active = np.zeros(u, dtype=bool)
        self.bfr_attempts = np.zeros(u, dtype=int)
        self.bfr_elapsed = np.zeros(u, dtype=int)
        self.reest_until = np.full(u, -1)
        self.deg_start = np.full(u, -1)
        self.serving_sinr = np.full(u, np.nan)
        self.rlm_value = np.full(u, np.nan)
        self.started = False
        self.rach_trace: list | None = None  # set to a list to record (t, ue, target, beam, q, sinr)

    # -- helpers --

    def _best_link(self, ue, cell, allowed):
        """Joint argmax over (Tx beam, allowed Rx config) of L1 for given UEs/cells."""
        l1 = self.bank.l1[ue, cell]  # (n, B, Q)
        n, b, q = l1.shape
        k = np.argmax(np.where(allowed, l1, -np.inf).reshape(n, b * q), axis=1)
        return k // q, k % q

    def _sinr(self, rsrp, ue, cell, beam, q):
        if len(ue) == 0:
            return np.zeros(0)
        table = rsrp[ue, :, :, q]  # (n, C, B)
        return batch_sinr(table, cell, beam, self.p.noise_dbm, self.p.k_b)

    def _attach(self, ues, cells, t_ms):
        b, q = self._best_link(ues, cells, self.serving_allowed)
        self.state[ues] = ATTACHED
        self.serving[ues] = cells
        self.b0[ues] = b
        self.q0[ues] = q
        self._clear_link_state(ues)

    def _clear_link_state(self, ues):
        self.a3[ues] = IDLE
        self.acq_beam[ues] = -1
        self.acq_q[ues] = -1
        self.acq_ready[ues] = -1
        self.cmd_at[ues] = -1
        self.rlf_timer[ues] = IDLE
        self.rlm.reset(ues)
        self.bfd[ues] = 0
        self.bfr_active[ues] = False

    def _close_degradation(self, ues, t_ms):
        for u in ues:
            if self.deg_start[u] >= 0:
                if t_ms > self.deg_start[u]:
                    book_outage(self.ledger, u, (int(self.deg_start[u]), int(t_ms)), "sinr_degradation")
                self.deg_start[u] = -1

    def _fail(self, ues, t_ms, kind):
        """Declare RLF or HOF and start re-establishment."""
        for u in ues:
            src = self.serving[u]
            tgt = self.ho_target[u] if kind == "HOF" else -1
            self.events.add(t_ms, u, kind, src, tgt, self.b0[u] + 1)
            self.ledger.count(kind.lower())
            book_outage(self.ledger, u, (t_ms, t_ms + self.p.reest_ms), "reestablishment")
            self.ledger.forget_ho(u)
        ues = np.asarray(ues, dtype=int)
        self._close_degradation(ues, t_ms)
        self.state[ues] = REESTABLISHING
        self.reest_until[ues] = t_ms + self.p.reest_ms
        self.ho_target[ues] = -1
        self._clear_link_state(ues)

    # -- main step --

    def step(self, t_ms: int, rsrp: np.ndarray, l1_tables: list | None) -> None:
        p = self.p
        l1_instant = l1_tables is not None
        if l1_instant:
            self.bank.update(l1_tables)
        if not self.started:
            if not l1_instant:
                raise RuntimeError("first step must be an L1 instant")
            ues = np.arange(self.n_ue)
            self._attach(ues, np.argmax(self.bank.l1_cell, axis=1), t_ms)
            self.started = True

        self._finish_reestablishment(t_ms)
        self._run_handover_execution(t_ms, rsrp)

        att = self.state == ATTACHED
        if l1_instant:
            idx = np.nonzero(att & ~self.bfr_active)[0]
            if len(idx):
                b, q = self._best_link(idx, self.serving[idx], self.serving_allowed)
                self.b0[idx] = b
                self.q0[idx] = q

        idx = np.nonzero(att)[0]
        sinr = np.full(self.n_ue, np.nan)
        sinr[idx] = self._sinr(rsrp, idx, self.serving[idx], self.b0[idx], self.q0[idx])
        self.serving_sinr = sinr
        if l1_instant:
            self.ledger.sinr_samples.extend(sinr[idx].tolist())

        bad = att & (sinr < p.gamma_out_db)
        newly = bad & (self.deg_start < 0)
        self.deg_start[newly] = t_ms
        self._close_degradation(np.nonzero(att & ~bad & (self.deg_start >= 0))[0], t_ms)

        # radio link monitoring
        rlm = self.rlm.update(sinr, att)
        self.rlm_value = rlm
        timer, fired = rlf_step(rlm, self.rlf_timer, p.dt_ms, p.gamma_out_db, p.gamma_in_db, p.t_rlf_ms)
        self.rlf_timer = np.where(att, timer, self.rlf_timer)
        rlf = att & fired

        rlf |= self._beam_failure(t_ms, rsrp, att & ~rlf, sinr, l1_instant)
        if rlf.any():
            self._fail(np.nonzero(rlf)[0], t_ms, "RLF")

        if l1_instant:
            self._a3_and_acquisition(t_ms, self.state == ATTACHED)
        self._deliver_commands(t_ms, rsrp, self.state == ATTACHED)

    def _finish_reestablishment(self, t_ms):
        done = np.nonzero((self.state == REESTABLISHING) & (self.reest_until <= t_ms))[0]
        if len(done) == 0:
            return
        cells = np.argmax(self.bank.l1_cell[done], axis=1)
        self._attach(done, cells, t_ms)
        self.bank.reset(done)
        for u, c in zip(done, cells):
            self.events.add(t_ms, u, "REEST", -1, c, self.b0[u] + 1)

    def _beam_failure(self, t_ms, rsrp, att, sinr, l1_instant):
        p = self.p
        fail = np.zeros(self.n_ue, dtype=bool)
        active = np.nonzero(att & self.bfr_active)[0]
        if len(active):
            self.bfr_elapsed[active] += p.dt_ms
            go = active[self.bfr_elapsed[active] % p.t_batt_ms == 0]
            if len(go):
                b, q = self._best_link(go, self.serving[go], self.serving_allowed)
                s = self._sinr(rsrp, go, self.serving[go], b, q)
                ok = s >= p.gamma_out_db
                for u, bb, qq in zip(go[ok], b[ok], q[ok]):
                    self.b0[u], self.q0[u] = bb, qq
                    self.events.add(t_ms, u, "BFR_OK", self.serving[u], self.serving[u], bb + 1)
                self.bfr_active[go[ok]] = False
                self.bfd[go[ok]] = 0
                bad = go[~ok]
                self.bfr_attempts[bad] += 1
                dead = bad[self.bfr_attempts[bad] >= p.n_batt]
                for u in dead:
                    self.events.add(t_ms, u, "BFR_FAIL", self.serving[u], self.serving[u], self.b0[u] + 1)
                fail[dead] = True
        if l1_instant:
            watch = att & ~self.bfr_active
            self.bfd = np.where(watch, np.where(sinr < p.gamma_out_db, self.bfd + 1, 0), self.bfd)
            start = watch & (self.bfd >= p.bfd_count)
            self.bfr_active[start] = True
            self.bfr_attempts[start] = 0
            self.bfr_elapsed[start] = 0
        return fail

    def _a3_and_acquisition(self, t_ms, att):
        p = self.p
        bank = self.bank
        u_idx = np.arange(self.n_ue)
        l3 = bank.l3_cell
        serving_l3 = l3[u_idx, np.maximum(self.serving, 0)]
        not_serving = np.arange(self.n_cells)[None, :] != self.serving[:, None]
        evaluating = (att & (self.cmd_at < 0))[:, None]
        cond = evaluating & not_serving & (serving_l3[:, None] + p.a3_offset_db < l3)
        new, fired = a3_step(cond, self.a3, self.l1_period_ms, p.ttt_ms)
        self.a3 = np.where(evaluating, new, IDLE)

        if self.approach.pre_ho_refined_acquisition:
            stopped = self.a3 < 0
            self.acq_beam[stopped] = -1
            self.acq_q[stopped] = -1
            self.acq_ready[stopped] = -1
            uu, cc = np.nonzero(self.a3 == p.early_report_ms)
            if len(uu):
                self.acq_beam[uu, cc] = np.argmax(bank.l3_beam[uu, cc], axis=1)
                self.acq_q[uu, cc] = -1
                self.acq_ready[uu, cc] = t_ms + p.ssb_ms
            uu, cc = np.nonzero((self.acq_q < 0) & (self.acq_ready >= 0) & (self.acq_ready <= t_ms))
            if len(uu):
                vals = bank.l1[uu, cc, self.acq_beam[uu, cc]]  # (n, Q)
                self.acq_q[uu, cc] = np.argmax(np.where(self.refined, vals, -np.inf), axis=1)

        trig = np.nonzero(fired.any(axis=1))[0]
        for u in trig:
            cand = np.nonzero(fired[u])[0]
            target = int(cand[np.argmax(l3[u, cand])])
            self.events.add(t_ms, u, "A3_TRIGGER", self.serving[u], target, -1)
            self.cmd_at[u] = t_ms + p.prep_delay_ms
            self.cmd_target[u] = target
            self.a3[u] = IDLE

    def _deliver_commands(self, t_ms, rsrp, att):
        """HO commands whose preparation delay has elapsed detach the UE."""
        due = np.nonzero(att & (self.cmd_at >= 0) & (self.cmd_at <= t_ms))[0]
        self._issue_commands(due, t_ms)

    def _issue_commands(self, ues, t_ms):
        p = self.p
        bank = self.bank
        for u in ues:
            target = int(self.cmd_target[u])
            beam = int(np.argmax(bank.l3_beam[u, target]))
            q = -1
            refine_at = -1
            if self.approach.pre_ho_refined_acquisition:
                if self.acq_q[u, target] >= 0:
                    q = int(self.acq_q[u, target])
                else:
                    refine_at = t_ms + p.ssb_ms
            if q < 0:
                vals = bank.l1[u, target, beam]
                q = int(np.argmax(np.where(~self.refined, vals, -np.inf)))
            self.events.add(t_ms, u, "HO_CMD", self.serving[u], target, beam + 1)
            self.ho_target[u] = target
            self.ho_beam[u] = beam
            self.ho_q[u] = q
            self.ho_refine_at[u] = refine_at
            self.ho_elapsed[u] = 0
            self.ho_cmd_time[u] = t_ms
        ues = np.asarray(ues, dtype=int)
        if len(ues):
            self._close_degradation(ues, t_ms)
            self.state[ues] = EXECUTING_HO
            self.cmd_at[ues] = -1
            self.a3[ues] = IDLE
            self.bfr_active[ues] = False
            self.bfd[ues] = 0

    def _run_handover_execution(self, t_ms, rsrp):
        p = self.p
        ex = np.nonzero(self.state == EXECUTING_HO)[0]
        if len(ex) == 0:
            return
        re = ex[(self.ho_refine_at[ex] >= 0) & (self.ho_refine_at[ex] <= t_ms)]
        for u in re:
            vals = self.bank.l1[u, self.ho_target[u], self.ho_beam[u]]
            self.ho_q[u] = int(np.argmax(np.where(self.refined, vals, -np.inf)))
            self.ho_refine_at[u] = -1
        s = self._sinr(rsrp, ex, self.ho_target[ex], self.ho_beam[ex], self.ho_q[ex])
        if self.rach_trace is not None:
            attempt = (self.ho_elapsed[ex] + p.dt_ms) % p.rach_period_ms == 0
            for u, v in zip(ex[attempt], s[attempt]):
                self.rach_trace.append((t_ms, int(u), int(self.ho_target[u]), int(self.ho_beam[u]),
                                        int(self.ho_q[u]), float(v)))
        el, ok, hof = rach_step(s, self.ho_elapsed[ex], p.dt_ms, p.gamma_out_db, p.t_hof_ms, p.rach_period_ms)
        self.ho_elapsed[ex] = el
        for u in ex[ok]:
            src, tgt = int(self.serving[u]), int(self.ho_target[u])
            self.events.add(t_ms, u, "HO_SUCCESS", src, tgt, self.ho_beam[u] + 1)
            t_cmd = int(self.ho_cmd_time[u])
            book_outage(self.ledger, u, (t_cmd, t_cmd + p.ho_outage_ms), "successful_ho")
            self.ledger.record_ho(u, t_ms, src, tgt)
        done = ex[ok]
        if len(done):
            tg = self.ho_target[done].copy()
            self._attach(done, tg, t_ms)
            self.b0[done] = self.ho_beam[done]
            vals = self.bank.l1[done, tg, self.ho_beam[done]]
            self.q0[done] = np.argmax(np.where(self.serving_allowed, vals, -np.inf), axis=1)
            self.ho_target[done] = -1
        if hof.any():
            self._fail(ex[hof], t_ms, "HOF")

    def finish(self, t_end_ms: int) -> None:
        """Close open degradation runs at the end of the run."""
        self._close_degradation(np.nonzero(self.deg_start >= 0)[0], t_end_ms)
