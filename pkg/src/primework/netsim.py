"""Deterministic discrete-event simulation of a miner network.

Every node keeps its own view of the block tree and extends the tip its
strategy picks.  Honest nodes follow fork choice; a withholding node keeps
found blocks secret and releases just enough of its private branch to
orphan the public chain when it can.  Block discovery is a Poisson race
(shares weighted by inverse difficulty), or optionally real mining runs at
tiny targets, so one seed always reproduces the same run event for event.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import random
import statistics
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .chains import FixedLength
from .consensus import (
    BindingMode,
    Block,
    BlockHeader,
    ChainState,
    RetargetConfig,
    genesis_block,
    header_hash,
    prescribed_target,
    validate_block,
)
from .miner import BlockTemplate, MinerConfig, mine_block

HONEST = "HONEST"
SELFISH = "SELFISH"
ABSTRACT = "ABSTRACT"
REAL = "REAL"


@dataclass(frozen=True)
class SimConfig:
    """One seeded experiment: who mines, how fast, and over what network."""

    shares: tuple[float, ...]
    strategies: tuple[str, ...]
    blocks: int
    seed: int = 0
    target_spacing: int = 600
    delay_min: int = 0
    delay_max: int = 0
    gamma: float = 0.0
    mining_model: str = ABSTRACT
    initial_target: float = 2.0
    min_target: float = 2.0
    retarget_window: int = 8
    retarget_max_step: float = 0.25
    # Total-compute factor per produced-block index; a mid-run entry models
    # miners joining or leaving.
    compute_profile: tuple[tuple[int, float], ...] = ((0, 1.0),)

    def __post_init__(self) -> None:
        object.__setattr__(self, "shares", tuple(float(s) for s in self.shares))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(
            self, "compute_profile", tuple((int(b), float(f)) for b, f in self.compute_profile)
        )
        if len(self.shares) == 0 or len(self.shares) != len(self.strategies):
            raise ValueError("shares and strategies must be non-empty and aligned")
        if any(s < 0 or s > 1 for s in self.shares):
            raise ValueError("shares must lie in [0, 1]")
        if abs(sum(self.shares) - 1.0) > 1e-9:
            raise ValueError("shares must sum to 1")
        if any(s not in (HONEST, SELFISH) for s in self.strategies):
            raise ValueError("strategies must be HONEST or SELFISH")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.blocks < 1:
            raise ValueError("blocks must be >= 1")
        if self.target_spacing < 1:
            raise ValueError("target_spacing must be >= 1")
        if not 0 <= self.delay_min <= self.delay_max:
            raise ValueError("delay bounds must satisfy 0 <= min <= max")
        if self.mining_model not in (ABSTRACT, REAL):
            raise ValueError("mining_model must be ABSTRACT or REAL")
        if not self.compute_profile or self.compute_profile[0][0] != 0:
            raise ValueError("compute_profile must start at block 0")
        if any(f <= 0 for _, f in self.compute_profile):
            raise ValueError("compute factors must be positive")
        if list(self.compute_profile) != sorted(self.compute_profile):
            raise ValueError("compute_profile must be sorted by block index")

    @property
    def node_count(self) -> int:
        return len(self.shares)

    def retarget_config(self) -> RetargetConfig:
        return RetargetConfig(
            target_spacing=self.target_spacing,
            window=self.retarget_window,
            max_step=FixedLength.from_float(self.retarget_max_step),
            min_target=FixedLength.from_float(self.min_target),
        )

    def to_dict(self) -> dict:
        return {
            "shares": list(self.shares),
            "strategies": list(self.strategies),
            "blocks": self.blocks,
            "seed": self.seed,
            "target_spacing": self.target_spacing,
            "delay_min": self.delay_min,
            "delay_max": self.delay_max,
            "gamma": self.gamma,
            "mining_model": self.mining_model,
            "initial_target": self.initial_target,
            "min_target": self.min_target,
            "retarget_window": self.retarget_window,
            "retarget_max_step": self.retarget_max_step,
            "compute_profile": [list(entry) for entry in self.compute_profile],
        }

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        known = set(cls.__dataclass_fields__)  # type: ignore[attr-defined]
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "compute_profile" in kwargs:
            kwargs["compute_profile"] = tuple(tuple(e) for e in kwargs["compute_profile"])
        for key in ("shares", "strategies"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> SimConfig:
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class SimMetrics:
    """Outcome of one run; counts are per node, in config order."""

    produced: list[int]
    in_best_chain: list[int]
    revenue_shares: list[float]
    orphans: int
    best_chain_length: int
    mean_interval: float
    stddev_interval: float
    reorg_depths: dict[int, int]
    chain_timestamps: list[int]
    chain_miners: list[int]
    chain_targets: list[int]
    compute_shares: list[float]
    invalid_blocks: int = 0

    def to_dict(self) -> dict:
        return {
            "produced": self.produced,
            "in_best_chain": self.in_best_chain,
            "revenue_shares": self.revenue_shares,
            "orphans": self.orphans,
            "best_chain_length": self.best_chain_length,
            "mean_interval": self.mean_interval,
            "stddev_interval": self.stddev_interval,
            "reorg_depths": {str(k): v for k, v in sorted(self.reorg_depths.items())},
            "chain_timestamps": self.chain_timestamps,
            "chain_miners": self.chain_miners,
            "chain_targets": self.chain_targets,
            "compute_shares": self.compute_shares,
            "invalid_blocks": self.invalid_blocks,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def revenue_share(metrics: SimMetrics) -> list[float]:
    """Fraction of the final best chain mined by each node (genesis excluded)."""
    if metrics.best_chain_length < 1:
        raise ValueError("best chain is empty")
    return [n / metrics.best_chain_length for n in metrics.in_best_chain]


class SelfishEvent(Enum):
    OWN_BLOCK_FOUND = "own_block_found"
    RIVAL_BLOCK = "rival_block"
    TICK = "tick"


class SelfishAction(Enum):
    WITHHOLD = "withhold"
    PUBLISH_ALL = "publish_all"
    PUBLISH_ONE = "publish_one"
    ADOPT = "adopt"
    NONE = "none"


@dataclass(frozen=True)
class SelfishState:
    """Withholding bookkeeping: secret lead and whether a tie race is live."""

    lead: int = 0
    in_race: bool = False


def selfish_step(state: SelfishState, event: SelfishEvent) -> tuple[SelfishState, SelfishAction]:
    """Decision kernel of the withholding strategy.

    Own finds extend the secret branch, except during a tie race where
    publishing immediately wins the race.  A rival block is answered from
    strength: with a lead of two the whole secret branch comes out and
    orphans the public chain, with a longer lead one old block is revealed,
    with a lead of one the race begins, and with no lead the public chain
    is adopted.  Only publish/withhold/adopt decisions come out of here;
    chain updates stay under the consensus rules.
    """
    if event == SelfishEvent.TICK:
        return state, SelfishAction.NONE
    if event == SelfishEvent.OWN_BLOCK_FOUND:
        if state.in_race:
            return SelfishState(lead=0, in_race=False), SelfishAction.PUBLISH_ALL
        return SelfishState(lead=state.lead + 1, in_race=False), SelfishAction.WITHHOLD
    # rival block extends the public chain by one
    if state.lead == 0:
        return SelfishState(lead=0, in_race=False), SelfishAction.ADOPT
    if state.lead == 1:
        return SelfishState(lead=0, in_race=True), SelfishAction.PUBLISH_ALL
    if state.lead == 2:
        return SelfishState(lead=0, in_race=False), SelfishAction.PUBLISH_ALL
    return SelfishState(lead=state.lead - 1, in_race=False), SelfishAction.PUBLISH_ONE


@dataclass
class _SimBlock:
    block_hash: bytes
    parent_hash: bytes
    miner: int
    timestamp: int
    target_raw: int
    header: Optional[BlockHeader] = None
    payload: bytes = b""


@dataclass
class _Race:
    selfish_node: int
    tie_height: int
    selfish_tip: bytes
    coins: dict[int, bool]


class _NodeState:
    def __init__(self, index: int, strategy: str) -> None:
        self.index = index
        self.strategy = strategy
        self.view = ChainState()
        self.pending: dict[bytes, list[_SimBlock]] = {}
        self.known: set[bytes] = set()
        self.epoch = 0
        self.mining_tip: Optional[bytes] = None
        # withholding strategy only:
        self.machine = SelfishState()
        self.private_tip: Optional[bytes] = None
        self.unpublished: list[_SimBlock] = []
        self.public_best: Optional[bytes] = None


_FIND, _ARRIVE = 0, 1


class _Simulation:
    def __init__(self, config: SimConfig) -> None:
        self.cfg = config
        self.rng = random.Random(config.seed)
        self.rc = config.retarget_config()
        self.initial_target_raw = FixedLength.from_float(config.initial_target).raw
        self.heap: list[tuple[int, int, int, int, object]] = []
        self.seq = 0
        self.found = 0
        self.invalid = 0
        self.produced = [0] * config.node_count
        self.reorg_depths: dict[int, int] = {}
        self.races: list[_Race] = []
        self.archive = ChainState()
        self.nodes = [_NodeState(i, s) for i, s in enumerate(config.strategies)]
        self.real = config.mining_model == REAL
        self.genesis = genesis_block(FixedLength(self.initial_target_raw))
        self.genesis_hash = header_hash(self.genesis.header)
        self._profile_fired: set[int] = set()

    def run(self) -> SimMetrics:
        root = _SimBlock(
            block_hash=self.genesis_hash,
            parent_hash=b"",
            miner=-1,
            timestamp=0,
            target_raw=self.initial_target_raw,
            header=self.genesis.header,
        )
        self._insert(self.archive, root, arrival_time=0)
        for node in self.nodes:
            self._insert(node.view, root, arrival_time=0)
            node.known.add(self.genesis_hash)
            node.mining_tip = self.genesis_hash
            node.private_tip = self.genesis_hash
            node.public_best = self.genesis_hash
            self._schedule_find(node, now=0)
        while self.heap:
            time, _, kind, node_idx, payload = heapq.heappop(self.heap)
            node = self.nodes[node_idx]
            if kind == _FIND:
                if payload != node.epoch or self.found >= self.cfg.blocks:
                    continue
                self._on_find(node, time)
            else:
                self._on_arrive(node, payload, time)  # type: ignore[arg-type]
        return self._metrics()

    # -- event plumbing ---------------------------------------------------

    def _push(self, time: int, kind: int, node_idx: int, payload: object) -> None:
        heapq.heappush(self.heap, (time, self.seq, kind, node_idx, payload))
        self.seq += 1

    def _compute_factor(self) -> float:
        factor = self.cfg.compute_profile[0][1]
        for at_block, f in self.cfg.compute_profile:
            if self.found >= at_block:
                factor = f
        return factor

    def _schedule_find(self, node: _NodeState, now: int) -> None:
        share = self.cfg.shares[node.index]
        if share <= 0:
            return
        tip = node.mining_tip
        assert tip is not None
        next_target = prescribed_target(node.view, tip, self.rc)
        rate = (
            share
            * self._compute_factor()
            * self.initial_target_raw
            / (self.cfg.target_spacing * next_target.raw)
        )
        dt = max(1, round(self.rng.expovariate(rate)))
        self._push(now + dt, _FIND, node.index, node.epoch)

    def _bump(self, node: _NodeState, now: int) -> None:
        node.epoch += 1
        self._schedule_find(node, now)

    def _delay(self) -> int:
        if self.cfg.delay_max == 0:
            return 0
        return self.rng.randint(self.cfg.delay_min, self.cfg.delay_max)

    # -- block creation ----------------------------------------------------

    def _make_block(self, node: _NodeState, parent_hash: bytes, time: int) -> _SimBlock:
        parent = node.view.nodes[parent_hash]
        target = prescribed_target(node.view, parent_hash, self.rc)
        if self.real:
            assert parent.header is not None
            payload = f"node={node.index};height={parent.height + 1};n={self.found}".encode()
            template = BlockTemplate(
                parent=parent.header,
                payload=payload,
                target=target,
                timestamp=time,
            )
            miner_cfg = MinerConfig(
                worker_count=1,
                max_batches=1 << 20,
                seed=self.rng.getrandbits(63),
            )
            header = mine_block(template, miner_cfg)
            if header is None:
                raise RuntimeError("real miner exhausted its budget mid-simulation")
            return _SimBlock(
                block_hash=header_hash(header),
                parent_hash=parent_hash,
                miner=node.index,
                timestamp=time,
                target_raw=target.raw,
                header=header,
                payload=payload,
            )
        seed = f"{parent_hash.hex()}:{node.index}:{self.found}".encode()
        return _SimBlock(
            block_hash=hashlib.sha256(seed).digest(),
            parent_hash=parent_hash,
            miner=node.index,
            timestamp=time,
            target_raw=target.raw,
        )

    def _insert(self, state: ChainState, block: _SimBlock, arrival_time: int) -> None:
        state.insert(
            block.block_hash,
            block.parent_hash or None,
            work=block.target_raw if block.parent_hash else 0,
            timestamp=block.timestamp,
            target_raw=block.target_raw,
            arrival_time=arrival_time,
            miner=block.miner,
            header=block.header,
        )

    # -- discovery ----------------------------------------------------------

    def _on_find(self, node: _NodeState, time: int) -> None:
        tip = self._mining_tip(node)
        block = self._make_block(node, tip, time)
        self.found += 1
        self.produced[node.index] += 1
        node.known.add(block.block_hash)
        old_tip = node.view.tip
        self._insert(node.view, block, arrival_time=time)
        self._track_view_tip(node, old_tip)
        if node.strategy == HONEST:
            self._publish(node, [block], time)
            node.mining_tip = self._mining_tip(node)
            self._bump(node, time)
        else:
            node.private_tip = block.block_hash
            node.unpublished.append(block)
            node.machine, action = selfish_step(node.machine, SelfishEvent.OWN_BLOCK_FOUND)
            if action == SelfishAction.PUBLISH_ALL:
                self._publish(node, node.unpublished, time)
                node.unpublished = []
            node.mining_tip = block.block_hash
            self._bump(node, time)
        self._maybe_compute_step(time)

    def _maybe_compute_step(self, time: int) -> None:
        for at_block, _ in self.cfg.compute_profile:
            if at_block == self.found and at_block not in self._profile_fired:
                self._profile_fired.add(at_block)
                for node in self.nodes:
                    self._bump(node, time)
                return

    def _publish(self, node: _NodeState, blocks: list[_SimBlock], time: int) -> None:
        for block in blocks:
            self._insert(self.archive, block, arrival_time=time)
            node.public_best = self._heavier(node.view, node.public_best, block.block_hash)
            for other in self.nodes:
                if other.index == node.index:
                    continue
                self._push(time + self._delay(), _ARRIVE, other.index, block)
        self._resolve_races()

    def _resolve_races(self) -> None:
        if not self.races:
            return
        best = self.archive.nodes[self.archive.tip]
        self.races = [race for race in self.races if best.height <= race.tie_height]

    @staticmethod
    def _heavier(view: ChainState, a: Optional[bytes], b: bytes) -> bytes:
        if a is None:
            return b
        if view.nodes[b].cumulative_work > view.nodes[a].cumulative_work:
            return b
        return a

    # -- arrivals -------------------------------------------------------------

    def _on_arrive(self, node: _NodeState, block: _SimBlock, time: int) -> None:
        if block.block_hash in node.known:
            return
        old_public = node.public_best
        old_tip = node.view.tip
        inserted = self._connect(node, block, time)
        if not inserted:
            return
        self._track_view_tip(node, old_tip)
        if node.strategy == HONEST:
            new_tip = self._mining_tip(node)
            if new_tip != node.mining_tip:
                node.mining_tip = new_tip
                self._bump(node, time)
        else:
            assert old_public is not None
            growth = (
                node.view.nodes[node.public_best].height  # type: ignore[index]
                - node.view.nodes[old_public].height
            )
            for _ in range(growth):
                self._selfish_machine_step(node, time)

    def _connect(self, node: _NodeState, block: _SimBlock, time: int) -> bool:
        """Insert a block, validating real ones, cascading parked children."""
        if block.parent_hash not in node.view.nodes:
            node.pending.setdefault(block.parent_hash, []).append(block)
            return False
        queue = [block]
        inserted = False
        while queue:
            blk = queue.pop(0)
            if blk.block_hash in node.known:
                continue
            if self.real and not self._valid_real(node, blk):
                self.invalid += 1
                continue
            node.known.add(blk.block_hash)
            self._insert(node.view, blk, arrival_time=time)
            node.public_best = self._heavier(node.view, node.public_best, blk.block_hash)
            inserted = True
            queue.extend(node.pending.pop(blk.block_hash, []))
        return inserted

    def _valid_real(self, node: _NodeState, blk: _SimBlock) -> bool:
        parent = node.view.nodes[blk.parent_hash]
        assert parent.header is not None and blk.header is not None
        expected = prescribed_target(node.view, blk.parent_hash, self.rc)
        verdict = validate_block(
            Block(header=blk.header, payload=blk.payload),
            parent.header,
            self.rc,
            BindingMode.PREVIOUS,
            expected_target=expected,
        )
        return verdict.valid

    # -- mining-tip policy -------------------------------------------------------

    def _mining_tip(self, node: _NodeState) -> bytes:
        if node.strategy == SELFISH:
            assert node.private_tip is not None
            return node.private_tip
        for race in self.races:
            if race.coins.get(node.index) and race.selfish_tip in node.view.nodes:
                return race.selfish_tip
        return node.view.tip

    def _track_view_tip(self, node: _NodeState, old_tip: bytes) -> None:
        new_tip = node.view.tip
        if new_tip == old_tip:
            return
        view = node.view
        if view.nodes[new_tip].parent_hash == old_tip:
            return  # plain extension
        depth = view.nodes[old_tip].height - view.common_ancestor_height(old_tip, new_tip)
        if depth >= 1:
            self.reorg_depths[depth] = self.reorg_depths.get(depth, 0) + 1

    # -- withholding strategy ------------------------------------------------------

    def _selfish_machine_step(self, node: _NodeState, time: int) -> None:
        node.machine, action = selfish_step(node.machine, SelfishEvent.RIVAL_BLOCK)
        if action == SelfishAction.ADOPT:
            node.unpublished = []
            new_tip = node.view.tip
            if new_tip != node.private_tip:
                node.private_tip = new_tip
                node.mining_tip = new_tip
                self._bump(node, time)
        elif action == SelfishAction.PUBLISH_ALL:
            race_begins = node.machine.in_race
            if node.unpublished:
                self._publish(node, node.unpublished, time)
                node.unpublished = []
            if race_begins:
                self._start_race(node)
        elif action == SelfishAction.PUBLISH_ONE:
            if node.unpublished:
                revealed = node.unpublished.pop(0)
                self._publish(node, [revealed], time)

    def _start_race(self, node: _NodeState) -> None:
        assert node.private_tip is not None
        coins = {
            other.index: self.rng.random() < self.cfg.gamma
            for other in self.nodes
            if other.strategy == HONEST
        }
        self.races.append(
            _Race(
                selfish_node=node.index,
                tie_height=node.view.nodes[node.private_tip].height,
                selfish_tip=node.private_tip,
                coins=coins,
            )
        )
        self._resolve_races()

    # -- reporting ----------------------------------------------------------------

    def _metrics(self) -> SimMetrics:
        chain = self.archive.best_chain()
        body = chain[1:]  # skip genesis
        in_best = [0] * self.cfg.node_count
        for entry in body:
            if entry.miner is not None and entry.miner >= 0:
                in_best[entry.miner] += 1
        length = len(body)
        timestamps = [entry.timestamp for entry in body]
        intervals = [b - a for a, b in zip([0] + timestamps, timestamps)]
        shares = [n / length for n in in_best] if length else [0.0] * self.cfg.node_count
        return SimMetrics(
            produced=list(self.produced),
            in_best_chain=in_best,
            revenue_shares=shares,
            orphans=sum(self.produced) - length,
            best_chain_length=length,
            mean_interval=statistics.fmean(intervals) if intervals else 0.0,
            stddev_interval=statistics.pstdev(intervals) if len(intervals) > 1 else 0.0,
            reorg_depths=dict(self.reorg_depths),
            chain_timestamps=timestamps,
            chain_miners=[entry.miner if entry.miner is not None else -1 for entry in body],
            chain_targets=[entry.target_raw for entry in body],
            compute_shares=list(self.cfg.shares),
            invalid_blocks=self.invalid,
        )


def run_simulation(config: SimConfig) -> SimMetrics:
    """Run one seeded experiment to completion and report per-node statistics."""
    return _Simulation(config).run()
