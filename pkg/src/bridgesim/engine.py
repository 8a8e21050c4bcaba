"""Deterministic discrete-event simulation of one bridge scenario.

Events run in ``(time, seq)`` order.  Injections are queued before any
honest traffic so that at equal ticks the attack runs first.  The seeded
generator is consumed only by honest-traffic generation and the watcher
draw, in a fixed order, so a run is a pure function of its inputs.
"""

from __future__ import annotations

import copy
import heapq
import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .adversary import Injection, inject
from .bridge import (
    FORWARD,
    REVERSE,
    Bridge,
    BridgeConfig,
    TransferRecord,
    TransferStatus,
    trust_set_of,
)
from .chain import GENESIS, Blockchain, BridgeEvent, Transaction, TxKind
from .errors import BridgeSimError, ConfigInvalid, InvalidAttestation
from .monitors import (
    RULE_PRECEDENCE,
    BridgeMonitor,
    Prior,
    PriorViolation,
    SubRule,
    Trace,
    bridge_legs,
    causal_events,
    classify_violation,
    default_grace,
    greedy_match,
)
from .offchain import Attestation, TrustSet, attest
from .scenario import Scenario, TrafficItem
from .surface import SurfaceReport, total_area

# event kinds
SUBMIT = "SubmitTransfer"
CONFIRM = "ConfirmLock"
EMIT = "EmitAttestation"
SETTLE = "VerifyAndSettle"
BUFFER_EXPIRY = "BufferExpiry"
CHALLENGE_EXPIRY = "ChallengeExpiry"
INJECTION = "Injection"
SWEEP = "MonitorSweep"
WATCHER = "HonestWatcherReview"


@dataclass(order=True)
class SimEvent:
    time: int
    seq: int
    kind: str = field(compare=False)
    payload: Any = field(compare=False, default=None)


@dataclass
class RunResult:
    scenario: str
    seed: int
    horizon: int
    violations: List[PriorViolation]
    loss: Dict[str, int]
    detection_latency: Optional[int]
    halted: bool
    final_balances: Dict[str, Dict[str, Dict[str, int]]]
    surface: SurfaceReport
    trust: TrustSet
    records: List[TransferRecord]
    trace: Trace
    injections: List[Injection]
    rejected: List[Tuple[int, str, str]]
    primary: Optional[PriorViolation] = None
    attack_layer: Optional[str] = None
    loss_delta: Optional[Dict[str, int]] = None

    @property
    def priors(self) -> set:
        return {v.prior for v in self.violations}


class Simulation:
    def __init__(self, scenario: Scenario, seed: Optional[int] = None,
                 horizon: Optional[int] = None) -> None:
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.horizon = scenario.horizon if horizon is None else horizon
        if self.horizon <= 0:
            raise ConfigInvalid("horizon must be positive")
        self.cfg: BridgeConfig = scenario.bridge
        self.rng = random.Random(self.seed)
        self.chains: Dict[str, Blockchain] = {
            spec.chain_id: Blockchain(spec.chain_id, spec.confirmation_delay)
            for spec in scenario.chains
        }
        self.bridge = Bridge(self.cfg)
        grace = scenario.grace if scenario.grace is not None else default_grace(self.cfg, self.chains)
        self.monitor = BridgeMonitor(self.cfg, grace)
        self.trace = Trace()
        self.now = 0
        self.violations: List[PriorViolation] = []
        self.rejected: List[Tuple[int, str, str]] = []
        self.injections: List[Injection] = []
        self._queue: List[SimEvent] = []
        self._seq = 0
        self._seen: set = set()
        self._pending: Dict[str, Tuple[TransferRecord, Attestation]] = {}
        self._settled: List[Attestation] = []
        self._forged = 0
        self._dos: List[Tuple[int, int, str]] = []
        self._dirty = False

    # scheduling ------------------------------------------------------------------

    def schedule(self, time: int, kind: str, payload: Any = None) -> None:
        heapq.heappush(self._queue, SimEvent(time, self._seq, kind, payload))
        self._seq += 1

    def commit(self, chain_id: str, tx: Transaction) -> Transaction:
        stamped = self.chains[chain_id].append_tx(tx)
        self.trace.add(stamped)
        self._dirty = True
        return stamped

    def _register(self, record: TransferRecord) -> None:
        for tx_id in record.tx_ids:
            if tx_id not in self.trace.txs:
                chain_id = tx_id.split("#")[0]
                self.trace.add(self.chains[chain_id].tx_by_id(tx_id))
                self._dirty = True

    # adversary hooks -----------------------------------------------------------------

    def forged_id(self, inj: Injection) -> str:
        self._forged += 1
        return f"x{self._forged}"

    def submit_attestation(self, att: Attestation) -> None:
        self.schedule(self.now, SETTLE, att)

    def settled_attestations(self, direction: str) -> List[Attestation]:
        return [a for a in self._settled if a.direction == direction]

    def track_deposit_event(self, event: BridgeEvent) -> None:
        chain = self.chains[self.cfg.source_chain_id]
        event = chain.emit_event(event)
        record = TransferRecord(event.transfer_id, FORWARD, event.value, event.token,
                                event.sender, event.recipient, t_initiated=self.now,
                                provenance=event.provenance)
        record.t_locked = self.now + chain.confirmation_delay
        record.advance(TransferStatus.LOCKED_OR_BURNED)
        self.bridge.records[event.transfer_id] = record
        self.schedule(record.t_locked, CONFIRM, event.transfer_id)

    def start_dos(self, inj: Injection, until: int, delay: int) -> None:
        self._dos.append((until, delay, inj.id))

    def rollback(self, chain_id: str, depth: int, inj: Injection) -> None:
        for tx in self.chains[chain_id].rollback(depth):
            self.trace.taint.setdefault(tx.tx_id, inj.id)
        self._dirty = True

    # run --------------------------------------------------------------------------

    def _genesis(self) -> None:
        cfg = self.cfg
        for spec in self.scenario.chains:
            for address in sorted(spec.genesis):
                for token, amount in sorted(spec.genesis[address].items()):
                    if amount:
                        self.commit(spec.chain_id, Transaction(token, amount, GENESIS, address,
                                                               0, TxKind.MINT))
        for side, chain_id, pool in (("source", cfg.source_chain_id, cfg.c1),
                                     ("dest", cfg.dest_chain_id, cfg.c2)):
            for token, amount in sorted(((cfg.lp_reserves or {}).get(side) or {}).items()):
                if amount:
                    self.commit(chain_id, Transaction(token, amount, GENESIS, pool, 0,
                                                      TxKind.MINT))
        self._dirty = False

    def _random_traffic(self) -> List[TrafficItem]:
        spec = self.scenario.random_traffic
        if spec is None:
            return []
        cfg = self.cfg
        items = []
        pairs = sorted(cfg.token_map.items())
        for _ in range(spec.count):
            at = spec.start + self.rng.randrange(spec.span)
            sender = self.rng.choice(spec.users)
            recipient = self.rng.choice(spec.users)
            value = self.rng.randint(1, spec.max_value)
            t1, t2 = self.rng.choice(pairs)
            if self.rng.randrange(100) < spec.reverse_share:
                items.append(TrafficItem(sender, recipient, value, at, REVERSE, t2))
            else:
                items.append(TrafficItem(sender, recipient, value, at, FORWARD, t1))
        return items

    def run(self) -> RunResult:
        self._genesis()
        for i, inj in enumerate(self.scenario.injections):
            inj = copy.deepcopy(inj)
            inj.id = f"inj{i}"
            self.injections.append(inj)
            self.trace.injections[inj.id] = inj.provenance
            self.schedule(inj.trigger_at, INJECTION, inj)
        traffic = list(self.scenario.honest_traffic) + self._random_traffic()
        for item in sorted(traffic, key=lambda it: it.at):
            self.schedule(item.at, SUBMIT, item)
        self.schedule(self.horizon, SWEEP)
        while self._queue and self._queue[0].time <= self.horizon:
            event = heapq.heappop(self._queue)
            self.now = event.time
            getattr(self, "_on_" + event.kind)(event.payload)
            if self._dirty or event.kind == SWEEP:
                self._sweep()
                self._dirty = False
        return self._result()

    # handlers -------------------------------------------------------------------------

    def _on_SubmitTransfer(self, item: TrafficItem) -> None:
        try:
            if item.direction == FORWARD:
                record = self.bridge.initiate_transfer(self.chains, item.sender, item.recipient,
                                                       item.value, self.now, item.token)
            else:
                record = self.bridge.reverse_transfer(self.chains, item.sender, item.recipient,
                                                      item.value, self.now, item.token)
        except BridgeSimError as exc:
            self.rejected.append((self.now, "submit", f"{type(exc).__name__}: {exc}"))
            return
        self._register(record)
        self.schedule(record.t_locked, CONFIRM, record.transfer_id)
        # make sure a stall is noticed even if nothing else happens
        stale_at = item.at + self.monitor.state.grace_window + 1
        if stale_at < self.horizon:
            self.schedule(stale_at, SWEEP)

    def _on_ConfirmLock(self, transfer_id: str) -> None:
        self.schedule(self.now, EMIT, (transfer_id, False))

    def _on_EmitAttestation(self, payload) -> None:
        transfer_id, deferred = payload
        record = self.bridge.records[transfer_id]
        if record.status is not TransferStatus.LOCKED_OR_BURNED:
            return
        if not deferred:
            for until, delay, inj_id in self._dos:
                if self.now < until:
                    for tx_id in record.tx_ids[:1]:
                        self.trace.taint.setdefault(tx_id, inj_id)
                    self.schedule(self.now + delay, EMIT, (transfer_id, True))
                    return
        initiating, _ = self.cfg.chains_for(record.direction)
        try:
            att = attest(self.bridge.mechanism, self.chains[initiating], transfer_id,
                         self.now, self.cfg.d_off)
        except BridgeSimError as exc:
            # the source entry vanished, e.g. after a reorg
            record.advance(TransferStatus.EXPIRED)
            self.rejected.append((self.now, "attest", f"{type(exc).__name__}: {exc}"))
            return
        self.schedule(att.issued_at, SETTLE, att)

    def _on_VerifyAndSettle(self, att: Attestation) -> None:
        record = self.bridge.record_for(att)
        try:
            self.bridge.settle_destination(record, att, self.chains, self.now)
        except InvalidAttestation as exc:
            self.rejected.append((self.now, "verify", f"{att.transfer_id}: {exc}"))
            if record.initiator is None:
                record.advance(TransferStatus.EXPIRED)
            return
        except BridgeSimError as exc:
            self.rejected.append((self.now, "settle", f"{type(exc).__name__}: {exc}"))
            record.advance(TransferStatus.EXPIRED)
            return
        self._after_settle_step(record, att)

    def _after_settle_step(self, record: TransferRecord, att: Attestation) -> None:
        d = self.bridge.defenses
        if record.status is TransferStatus.BUFFER_PENDING:
            self._pending[record.transfer_id] = (record, att)
            self.schedule(self.now + d.buffer_delay, BUFFER_EXPIRY, record.transfer_id)
        elif record.status is TransferStatus.CHALLENGE_PENDING:
            self._pending[record.transfer_id] = (record, att)
            review_at = self.now + 1 if d.challenge_period > 1 else self.now
            self.schedule(review_at, WATCHER, record.transfer_id)
            self.schedule(self.now + d.challenge_period, CHALLENGE_EXPIRY, record.transfer_id)
        elif record.status is TransferStatus.COMPLETED:
            self._settled.append(att)
            self.bridge.settled.add((att.direction, att.transfer_id))
            self._register(record)

    def _on_BufferExpiry(self, key: str) -> None:
        record, att = self._pending[key]
        if record.status is not TransferStatus.BUFFER_PENDING:
            return
        if self._veto(att):
            record.advance(TransferStatus.HALTED)
            if self.bridge.defenses.breaker_on_monitor_trip:
                self.bridge.halted = True
            return
        try:
            self.bridge.after_buffer(record, att, self.chains, self.now)
        except BridgeSimError as exc:
            self.rejected.append((self.now, "settle", f"{type(exc).__name__}: {exc}"))
            record.advance(TransferStatus.EXPIRED)
            return
        self._after_settle_step(record, att)

    def _veto(self, att: Attestation) -> bool:
        """Dry-run the settlement; record and veto it if a monitor would trip."""
        _, settle_chain = self.cfg.chains_for(att.direction)
        chains = copy.deepcopy(self.chains)
        monitor = self.monitor.copy()
        hypothetical: Dict[str, Transaction] = {}
        try:
            for tx in self.bridge.settlement_txs(att, self.now):
                stamped = chains[settle_chain].append_tx(tx)
                hypothetical[stamped.tx_id] = stamped
        except BridgeSimError:
            return True
        fresh = [v for v in monitor.sweep(chains, self.now) if self._is_new(v)]
        if not fresh:
            return False
        rename = {tx_id: f"vetoed:{tx_id}" for tx_id in hypothetical}
        for tx_id, tx in hypothetical.items():
            self.trace.txs[rename[tx_id]] = tx
        for v in fresh:
            evidence = tuple(rename.get(ref, ref) for ref in v.evidence)
            self._record(PriorViolation(v.prior, v.sub_rule, v.detected_at, evidence,
                                        v.classification, v.detail + " (vetoed)", v.scope))
        return True

    def _on_HonestWatcherReview(self, key: str) -> None:
        draw = self.rng.random()
        record, att = self._pending[key]
        if record.status is not TransferStatus.CHALLENGE_PENDING:
            return
        if draw < self.bridge.defenses.honest_watcher_prob and self._fraudulent(att):
            record.advance(TransferStatus.REVERSED)

    def _fraudulent(self, att: Attestation) -> bool:
        """A watcher's fraud proof: the claim is not backed by its source entry."""
        initiating, settle_chain = self.cfg.chains_for(att.direction)
        chain = self.chains[initiating]
        event = chain.find_event(att.transfer_id)
        if event is None or event.backing_tx_id is None:
            return True
        backing = chain.tx_by_id(event.backing_tx_id)
        if backing is None or backing.value != att.claimed_value:
            return True
        if event.recipient != att.claimed_recipient or att.chain_binding != settle_chain:
            return True
        if event.direction != att.direction:
            return True
        return (att.direction, att.transfer_id) in self.bridge.settled

    def _on_ChallengeExpiry(self, key: str) -> None:
        record, att = self._pending[key]
        if record.status is not TransferStatus.CHALLENGE_PENDING:
            return
        if self.bridge.halted:
            record.advance(TransferStatus.HALTED)
            return
        try:
            self.bridge.finalize(record, att, self.chains, self.now)
        except BridgeSimError as exc:
            self.rejected.append((self.now, "settle", f"{type(exc).__name__}: {exc}"))
            record.advance(TransferStatus.EXPIRED)
            return
        self._after_settle_step(record, att)

    def _on_Injection(self, inj: Injection) -> None:
        inject(self, inj)

    def _on_MonitorSweep(self, _payload) -> None:
        pass

    # monitors --------------------------------------------------------------------------

    def _dedup_keys(self, v: PriorViolation) -> List[tuple]:
        if v.sub_rule is SubRule.EQ3:
            return [(v.sub_rule, v.scope)]
        return [(v.sub_rule, ref) for ref in v.evidence]

    def _is_new(self, v: PriorViolation) -> bool:
        return any(k not in self._seen for k in self._dedup_keys(v))

    def _record(self, v: PriorViolation) -> None:
        v = classify_violation(v, self.trace)
        self._seen.update(self._dedup_keys(v))
        self.violations.append(v)
        if self.bridge.defenses.breaker_on_monitor_trip:
            self.bridge.halted = True

    def _sweep(self) -> None:
        for v in self.monitor.sweep(self.chains, self.now):
            if self._is_new(v):
                self._record(v)

    # metrics ---------------------------------------------------------------------------

    def _result(self) -> RunResult:
        result = RunResult(
            scenario=self.scenario.name,
            seed=self.seed,
            horizon=self.horizon,
            violations=list(self.violations),
            loss={},
            detection_latency=None,
            halted=self.bridge.halted,
            final_balances=final_balances(self.chains),
            surface=total_area(self.cfg, self.scenario.catalog),
            trust=trust_set_of(self.cfg),
            records=[self.bridge.records[k] for k in self.bridge.records],
            trace=self.trace,
            injections=self.injections,
            rejected=list(self.rejected),
        )
        return compute_metrics(self, result)


def final_balances(chains: Mapping[str, Blockchain]) -> Dict[str, Dict[str, Dict[str, int]]]:
    out: Dict[str, Dict[str, Dict[str, int]]] = {}
    for chain_id in sorted(chains):
        per: Dict[str, Dict[str, int]] = defaultdict(dict)
        for (address, token), amount in sorted(chains[chain_id].balances().items()):
            per[address][token] = amount
        out[chain_id] = dict(per)
    return out


def bridge_loss(cfg: BridgeConfig, chains: Mapping[str, Blockchain]) -> Dict[str, int]:
    """Value paid out by the bridge with no backing source entry, per token.

    Unmatched settlements and custody drains count in full; a settlement
    that inflates a genuine transfer only counts the excess.
    """
    prices = cfg.prices
    loss: Dict[str, Fraction] = defaultdict(Fraction)
    for pair, pl in sorted(bridge_legs(cfg, chains).items()):
        for direction, inits, settles in ((FORWARD, pl.fwd_init, pl.fwd_settle),
                                          (REVERSE, pl.rev_init, pl.rev_settle)):
            match = greedy_match(causal_events(inits, prices, direction, pair),
                                 causal_events(settles, prices, direction, pair))
            stray = {e.ref for e in match.unmatched_mints}
            open_inits = {tx.transfer_id: tx for tx in inits
                          if tx.tx_id in {e.ref for e in match.unmatched_locks}}
            for tx in settles:
                if tx.tx_id not in stray:
                    continue
                amount = Fraction(tx.value)
                backing = open_inits.pop(tx.transfer_id, None) if tx.transfer_id else None
                if backing is not None:
                    amount -= backing.value * prices[backing.token] / prices[tx.token]
                loss[tx.token] += max(amount, Fraction(0))
        for tx in pl.drain_src + pl.drain_dest:
            loss[tx.token] += tx.value
    return {token: int(amount) for token, amount in sorted(loss.items()) if amount > 0}


def _primary(violations: Sequence[PriorViolation]) -> Optional[PriorViolation]:
    if not violations:
        return None
    non_peg = [v for v in violations if v.prior is not Prior.PEG]
    pool = non_peg or list(violations)
    return min(pool, key=lambda v: (v.detected_at, RULE_PRECEDENCE[v.sub_rule]))


def compute_metrics(sim: Simulation, result: RunResult,
                    baseline: Optional[RunResult] = None) -> RunResult:
    result.loss = bridge_loss(sim.cfg, sim.chains)
    triggers = [inj.trigger_at for inj in sim.injections]
    if result.violations and triggers:
        first_inj = min(triggers)
        after = [v.detected_at for v in result.violations if v.detected_at >= first_inj]
        result.detection_latency = (min(after) - first_inj) if after else None
    result.primary = _primary(result.violations)
    result.attack_layer = _attack_layer(sim, result.primary)
    if baseline is not None:
        tokens = sorted(set(result.loss) | set(baseline.loss))
        result.loss_delta = {t: baseline.loss.get(t, 0) - result.loss.get(t, 0) for t in tokens}
    return result


def _attack_layer(sim: Simulation, primary: Optional[PriorViolation]) -> Optional[str]:
    if not sim.injections:
        return None
    by_id = {inj.id: inj for inj in sim.injections}
    if primary is not None:
        for ref in primary.evidence:
            tx = sim.trace.txs.get(ref)
            for cause in (tx.cause if tx else None, sim.trace.taint.get(ref)):
                if cause in by_id:
                    return by_id[cause].layer.value
    return min(sim.injections, key=lambda i: (i.trigger_at, i.id)).layer.value


def run_scenario(scenario: Scenario, seed: Optional[int] = None,
                 horizon: Optional[int] = None) -> RunResult:
    return Simulation(scenario, seed, horizon).run()


def _run_one(args) -> RunResult:
    scenario, seed, horizon = args
    return run_scenario(scenario, seed, horizon)


def run_batch(items: Sequence[Tuple[Scenario, int]], horizon: Optional[int] = None,
              workers: int = 1) -> List[RunResult]:
    """Run isolated (scenario, seed) pairs; results ordered by name then seed."""
    jobs = [(scenario, seed, horizon) for scenario, seed in items]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    return sorted(results, key=lambda r: (r.scenario, r.seed))
