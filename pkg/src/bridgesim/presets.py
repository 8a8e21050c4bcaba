"""Incident replays at abstract scale.

Each preset pre-funds the bridge with honest traffic, then fires the
incident's injection at tick 100.  Token quantities follow the public
incident reports where a token amount was reported; the rest are round
illustrative amounts.  Prices are
illustrative too and only matter for the notional circuit breaker.
"""

from __future__ import annotations

import dataclasses
import random
from fractions import Fraction
from typing import Callable, Dict, List

from .adversary import Injection
from .bridge import (
    FORWARD,
    REVERSE,
    BridgeConfig,
    FeeSchedule,
    FeeTerm,
    FunctionalType,
)
from .chain import Provenance
from .errors import UnknownPreset
from .offchain import BugFlag, HybridAnd, LightClientModel, NotarySet
from .scenario import ChainSpec, Expected, RandomTraffic, Scenario, TrafficItem
from .surface import Layer

ATTACK_TICK = 100
HORIZON = 200

# Published fee schedules, in the fee currency's base units.
FEE_SCHEDULES: Dict[str, FeeSchedule] = {
    "avalanche_forward": FeeSchedule(f_star=FeeTerm(rate=Fraction(25, 100_000)),
                                     min_cap=3, max_cap=250),
    "avalanche_reverse": FeeSchedule(f_star=FeeTerm(rate=Fraction(1, 1000)),
                                     min_cap=12, max_cap=1000),
    "multichain_ethereum": FeeSchedule(f_star=FeeTerm(rate=Fraction(1, 1000)),
                                       min_cap=40, max_cap=1000),
}


def _notary(n: int, m: int, prefix: str = "v", **kw) -> NotarySet:
    return NotarySet(keys=tuple(f"{prefix}{i}" for i in range(1, n + 1)), m=m, **kw)


def _deposits(token: str, total: int, chunk: int, start: int = 1,
              whale: str = "whale") -> List[TrafficItem]:
    items = []
    tick = start
    while total > 0:
        value = min(chunk, total)
        items.append(TrafficItem(whale, f"{whale}-dest", value, tick, FORWARD, token))
        total -= value
        tick += 1
    return items


def _chains(src: str, dest: str, genesis: Dict[str, Dict[str, int]]) -> List[ChainSpec]:
    return [ChainSpec(src, 2, genesis), ChainSpec(dest, 2, {})]


def ronin_2022() -> Scenario:
    cfg = BridgeConfig(
        source_chain_id="ethereum",
        dest_chain_id="ronin",
        offchain=_notary(9, 5, delay=1),
        token_map={"ETH": "WETH", "USDC": "USDC.r"},
        prices={"ETH": Fraction(1500), "WETH": Fraction(1500),
                "USDC": Fraction(1), "USDC.r": Fraction(1)},
        d_off=1,
    )
    traffic = _deposits("ETH", 200_000, 10_000) + _deposits("USDC", 30_000_000, 15_000_000, 30)
    traffic.append(TrafficItem("whale-dest", "whale", 100, 50, REVERSE, "WETH"))
    inj = Injection("V13", ATTACK_TICK, {
        "keys_compromised": 5,
        "direction": REVERSE,
        "forged": [
            {"token": "ETH", "value": 173_600, "recipient": "attacker"},
            {"token": "USDC", "value": 25_500_000, "recipient": "attacker"},
        ],
    }, layer=Layer.OFFCHAIN)
    return Scenario(
        "ronin_2022", _chains("ethereum", "ronin",
                              {"whale": {"ETH": 200_000, "USDC": 30_000_000}}),
        cfg, traffic, [inj], horizon=HORIZON,
        expected=Expected("Causality", "Attack", "offchain",
                          {"ETH": 173_600, "USDC": 25_500_000},
                          "Ronin, March 2022; 5 of 9 validator keys"),
    )


def wormhole_2022() -> Scenario:
    cfg = BridgeConfig(
        source_chain_id="ethereum",
        dest_chain_id="solana",
        offchain=_notary(19, 13, prefix="g", delay=1,
                         bug_flags=frozenset({BugFlag.SKIP_SIGNATURE_CHECK})),
        token_map={"ETH": "WETH"},
        prices={"ETH": Fraction(1500), "WETH": Fraction(1500)},
        d_off=1,
    )
    traffic = _deposits("ETH", 5_000, 1_000)
    inj = Injection("V12", ATTACK_TICK, {
        "keys_compromised": 0,
        "direction": FORWARD,
        "forged": [{"token": "WETH", "value": 120_000, "recipient": "attacker"}],
    }, layer=Layer.DEST)
    return Scenario(
        "wormhole_2022", _chains("ethereum", "solana", {"whale": {"ETH": 5_000}}),
        cfg, traffic, [inj], horizon=HORIZON,
        expected=Expected("Causality", "Attack", "destination", {"WETH": 120_000},
                          "Wormhole, February 2022; guardian signature check skipped"),
    )


def nomad_2022() -> Scenario:
    cfg = BridgeConfig(
        source_chain_id="ethereum",
        dest_chain_id="moonbeam",
        offchain=LightClientModel(t_proof=2,
                                  bug_flags=frozenset({BugFlag.ZERO_TRUSTED_ROOT})),
        token_map={"WBTC": "madWBTC"},
        prices={"WBTC": Fraction(20_000), "madWBTC": Fraction(20_000)},
        d_off=1,
    )
    traffic = _deposits("WBTC", 1_000, 250)
    # copycats replay the first exploit's message shape with their own addresses
    inj = Injection("V10", ATTACK_TICK, {
        "direction": REVERSE,
        "copycats": 3,
        "forged": [{"token": "WBTC", "value": 100, "recipient": "copycat"}],
    }, layer=Layer.DEST)
    return Scenario(
        "nomad_2022", _chains("ethereum", "moonbeam", {"whale": {"WBTC": 1_000}}),
        cfg, traffic, [inj], horizon=HORIZON,
        expected=Expected("Causality", "Attack", "destination", {"WBTC": 300},
                          "Nomad, August 2022; trusted root initialised to zero"),
    )


def qubit_2022() -> Scenario:
    cfg = BridgeConfig(
        source_chain_id="ethereum",
        dest_chain_id="bsc",
        offchain=_notary(3, 2, prefix="relayer", delay=1),
        token_map={"ETH": "qXETH"},
        prices={"ETH": Fraction(1500), "qXETH": Fraction(1500)},
        d_off=1,
        vulnerabilities=frozenset({"unchecked_deposit"}),
    )
    traffic = _deposits("ETH", 2_000, 500)
    inj = Injection("V3", ATTACK_TICK, {
        "forged": [{"token": "qXETH", "value": 10_000, "recipient": "attacker"}],
    }, layer=Layer.SOURCE)
    return Scenario(
        "qubit_2022", _chains("ethereum", "bsc", {"whale": {"ETH": 2_000}}),
        cfg, traffic, [inj], horizon=HORIZON,
        expected=Expected("Causality", "Attack", "source", {"qXETH": 10_000},
                          "Qubit, January 2022; deposit call without collateral"),
    )


def bsc_token_hub_2022() -> Scenario:
    """Forged proof against the hub's proof verifier.

    The incident's mechanics are unbacked minting, yet it is usually filed
    as a consistency break.  The forgery re-claims an already settled
    transfer id, so the double claim fires on the same tick as the missing
    lock and the run reports the labelled prior.
    """
    cfg = BridgeConfig(
        source_chain_id="bnb-beacon",
        dest_chain_id="bsc",
        offchain=LightClientModel(t_proof=2,
                                  bug_flags=frozenset({BugFlag.PROOF_VERIFIER_BUG})),
        token_map={"BNB-BC": "BNB"},
        prices={"BNB-BC": Fraction(300), "BNB": Fraction(300)},
        d_off=1,
    )
    traffic = _deposits("BNB-BC", 1_000, 100)
    inj = Injection("V9", ATTACK_TICK, {
        "direction": FORWARD,
        "claim_settled": True,
        "forged": [{"token": "BNB", "value": 2_000_000, "recipient": "attacker"}],
    }, layer=Layer.OFFCHAIN)
    return Scenario(
        "bsc_token_hub_2022", _chains("bnb-beacon", "bsc", {"whale": {"BNB-BC": 1_000}}),
        cfg, traffic, [inj], horizon=HORIZON,
        expected=Expected("Consistency", "Attack", "offchain", {"BNB": 2_000_000},
                          "BSC Token Hub, October 2022; 2 million BNB minted"),
    )


def harmony_2022() -> Scenario:
    cfg = BridgeConfig(
        source_chain_id="ethereum",
        dest_chain_id="harmony",
        offchain=_notary(5, 2, delay=1),
        token_map={"ETH": "1ETH"},
        prices={"ETH": Fraction(1500), "1ETH": Fraction(1500)},
        d_off=1,
    )
    traffic = _deposits("ETH", 50_000, 10_000)
    inj = Injection("V12", ATTACK_TICK, {
        "keys_compromised": 2,
        "direction": REVERSE,
        "forged": [{"token": "ETH", "value": 40_000, "recipient": "attacker"}],
    }, layer=Layer.OFFCHAIN)
    return Scenario(
        "harmony_2022", _chains("ethereum", "harmony", {"whale": {"ETH": 50_000}}),
        cfg, traffic, [inj], horizon=HORIZON,
        expected=Expected("Causality", "Attack", "offchain", {"ETH": 40_000},
                          "Harmony Horizon, June 2022; 2-of-5 multisig"),
    )


def omni_2022() -> Scenario:
    cfg = BridgeConfig(
        source_chain_id="ethereum",
        dest_chain_id="gnosis",
        offchain=_notary(4, 3, delay=1,
                         bug_flags=frozenset({BugFlag.NO_CHAIN_ID_BINDING})),
        token_map={"WETH": "WETH.g"},
        prices={"WETH": Fraction(1500), "WETH.g": Fraction(1500)},
        d_off=1,
    )
    traffic = _deposits("WETH", 1_000, 500)
    traffic.append(TrafficItem("whale-dest", "whale", 200, 40, REVERSE, "WETH.g"))
    # the settled withdrawal is replayed with the forked chain's id
    inj = Injection("V15", ATTACK_TICK, {
        "direction": REVERSE,
        "replay_target_chain": "ethereum-pow",
    }, layer=Layer.DEST)
    return Scenario(
        "omni_2022", _chains("ethereum", "gnosis", {"whale": {"WETH": 1_000}}),
        cfg, traffic, [inj], horizon=HORIZON,
        expected=Expected("Consistency", "Attack", "destination", {"WETH": 200},
                          "Omni, September 2022; 200 WETH replayed"),
    )


def poly_2021() -> Scenario:
    cfg = BridgeConfig(
        source_chain_id="ethereum",
        dest_chain_id="poly",
        offchain=_notary(4, 3, prefix="keeper", delay=1),
        token_map={"ETH": "pETH"},
        prices={"ETH": Fraction(1500), "pETH": Fraction(1500)},
        d_off=1,
        vulnerabilities=frozenset({"unchecked_external_call"}),
    )
    traffic = _deposits("ETH", 5_000, 1_000)
    inj = Injection("V9", ATTACK_TICK, {
        "direction": REVERSE,
        "keeper_takeover": True,
        "forged": [{"token": "ETH", "value": 2_857, "recipient": "attacker"}],
    }, layer=Layer.SOURCE)
    return Scenario(
        "poly_2021", _chains("ethereum", "poly", {"whale": {"ETH": 5_000}}),
        cfg, traffic, [inj], horizon=HORIZON,
        expected=Expected("Causality", "Attack", "source", {"ETH": 2_857},
                          "Poly Network, August 2021; keeper set rewritten"),
    )


def multichain_2023() -> Scenario:
    cfg = BridgeConfig(
        source_chain_id="ethereum",
        dest_chain_id="fantom",
        offchain=_notary(3, 2, prefix="mpc", delay=1),
        token_map={"USDC": "USDC.f"},
        prices={"USDC": Fraction(1), "USDC.f": Fraction(1)},
        d_off=1,
    )
    traffic = _deposits("USDC", 200_000_000, 50_000_000)
    # every MPC share sits with one actor
    inj = Injection("V13", ATTACK_TICK, {
        "keys_compromised": 3,
        "direction": REVERSE,
        "forged": [{"token": "USDC", "value": 126_000_000, "recipient": "attacker"}],
    }, layer=Layer.OFFCHAIN)
    return Scenario(
        "multichain_2023", _chains("ethereum", "fantom", {"whale": {"USDC": 200_000_000}}),
        cfg, traffic, [inj], horizon=HORIZON,
        expected=Expected("Causality", "Attack", "offchain", {"USDC": 126_000_000},
                          "Multichain, July 2023; MPC key shares held by one actor"),
    )


PRESETS: Dict[str, Callable[[], Scenario]] = {
    "ronin_2022": ronin_2022,
    "wormhole_2022": wormhole_2022,
    "nomad_2022": nomad_2022,
    "qubit_2022": qubit_2022,
    "bsc_token_hub_2022": bsc_token_hub_2022,
    "harmony_2022": harmony_2022,
    "omni_2022": omni_2022,
    "poly_2021": poly_2021,
    "multichain_2023": multichain_2023,
}

# presets whose exploit is reaching the notary quorum with stolen keys
QUORUM_PRESETS = ("ronin_2022", "harmony_2022", "multichain_2023")

# presets where the attacker hands a forged or replayed attestation straight
# to the destination; Qubit's bogus deposit is relayed honestly instead
FORGED_SETTLEMENT_PRESETS = tuple(n for n in PRESETS if n != "qubit_2022")


def preset_names() -> List[str]:
    return list(PRESETS)


def build_preset(name: str) -> Scenario:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise UnknownPreset(name) from None
    return factory()


def reorg_fault() -> Scenario:
    """No adversary: a deep source reorg erases a lock that was already minted."""
    cfg = BridgeConfig(
        source_chain_id="alpha",
        dest_chain_id="beta",
        offchain=_notary(5, 3, delay=1),
        token_map={"TKN": "TKN.b"},
        prices={"TKN": Fraction(1), "TKN.b": Fraction(1)},
    )
    traffic = [TrafficItem("a1", "a2", 40, 1)]
    inj = Injection("V20", 20, {"reorg_depth": 1}, provenance=Provenance.FAULTY,
                    layer=Layer.SOURCE)
    return Scenario("reorg_fault", [ChainSpec("alpha", 1, {"a1": {"TKN": 100}}),
                                    ChainSpec("beta", 1)],
                    cfg, traffic, [inj], horizon=60,
                    expected=Expected("Causality", "Failure", "source", {"TKN.b": 40}))


def with_layered_validation(scenario: Scenario) -> Scenario:
    """Require a second, independent and sound verifier for every settlement.

    Notary bridges gain a light client; light-client bridges gain a notary
    committee.  The attacker's foothold in one verifier no longer suffices.
    """
    mech = scenario.bridge.offchain
    if isinstance(mech, NotarySet):
        other = LightClientModel(t_proof=2)
    elif isinstance(mech, LightClientModel):
        other = _notary(5, 3, prefix="guard", delay=1)
    else:
        raise UnknownPreset(f"{scenario.name}: no complementary verifier for {type(mech).__name__}")
    scenario.bridge = dataclasses.replace(scenario.bridge, offchain=HybridAnd(mech, other))
    scenario.name += "+layered"
    return scenario


# Random scenarios --------------------------------------------------------------------


def random_adversarial_scenario(seed: int) -> Scenario:
    """A preset with a shifted, rescaled attack, optional extra faults and noise."""
    rng = random.Random(seed)
    name = rng.choice(sorted(PRESETS))
    scenario = build_preset(name)
    scenario.name = f"random_{seed}_{name}"
    scenario.seed = seed
    main = scenario.injections[0]
    main.trigger_at = rng.randint(60, 140)
    for item in main.params.get("forged") or []:
        item["value"] = max(1, item["value"] * rng.randint(1, 20) // 20)
    users = ["alice", "bob", "carol"]
    src = scenario.chains[0]
    t1 = next(iter(scenario.bridge.token_map))
    for user in users:
        src.genesis[user] = {t1: 10_000}
    scenario.random_traffic = RandomTraffic(rng.randint(0, 8), users, 500, start=rng.randint(1, 60),
                                            span=100, reverse_share=20)
    extra = rng.choice(["none", "dos", "reorg", "replay", "cap"])
    tick = rng.randint(40, 160)
    if extra == "dos":
        scenario.injections.append(Injection("V19", tick, {"dos_delay": rng.randint(20, 60)},
                                             layer=Layer.OFFCHAIN))
    elif extra == "reorg":
        scenario.injections.append(Injection("V20", tick, {"reorg_depth": rng.randint(1, 4)},
                                             layer=Layer.SOURCE))
    elif extra == "replay":
        scenario.bridge.replay_tracking = rng.random() < 0.5
        scenario.injections.append(Injection("V15", tick, {"direction": FORWARD},
                                             layer=Layer.DEST))
    elif extra == "cap":
        scenario.injections.append(Injection("V21", tick, {}, layer=Layer.SOURCE))
    scenario.expected = None
    return scenario


def random_honest_scenario(seed: int) -> Scenario:
    """Honest mixed traffic over one of the three settlement modes."""
    rng = random.Random(seed)
    mode = [FunctionalType.LOCK_MINT, FunctionalType.BURN_MINT, FunctionalType.LIQUIDITY][seed % 3]
    users = [f"user{i}" for i in range(rng.randint(2, 5))]
    fees = FeeSchedule(
        f1=FeeTerm(rng.randint(0, 2), Fraction(rng.randint(0, 3), 1000)),
        f2=FeeTerm(rng.randint(0, 2), Fraction(rng.randint(0, 3), 1000)),
        f_star=FeeTerm(rng.randint(0, 2)),
        min_cap=0,
        max_cap=rng.choice([None, 5]),
    )
    reserves = None
    if mode is FunctionalType.LIQUIDITY:
        reserves = {"source": {"TKN": 1_000_000}, "dest": {"TKN.b": 1_000_000}}
    cfg = BridgeConfig(
        source_chain_id="alpha",
        dest_chain_id="beta",
        offchain=rng.choice([_notary(5, 3, delay=1), LightClientModel(t_proof=3)]),
        token_map={"TKN": "TKN.b"},
        prices={"TKN": Fraction(2), "TKN.b": Fraction(2)},
        functional_type=mode,
        fees=fees,
        d_off=rng.randint(0, 2),
        lp_reserves=reserves,
    )
    genesis = {u: {"TKN": 5_000} for u in users}
    dest_genesis = {}
    if mode is FunctionalType.LIQUIDITY:
        # in liquidity mode users may already hold destination tokens
        dest_genesis = {u: {"TKN.b": 1_000} for u in users}
    chains = [ChainSpec("alpha", rng.randint(1, 3), genesis),
              ChainSpec("beta", rng.randint(1, 3), dest_genesis)]
    return Scenario(
        f"honest_{seed}", chains, cfg, seed=seed, horizon=300,
        random_traffic=RandomTraffic(rng.randint(10, 30), users, 400, start=1, span=150,
                                     reverse_share=40),
    )
