"""Sweep stolen keys across a notary quorum; loss appears exactly at m."""

from bridgesim import build_preset, run_scenario
from bridgesim.presets import QUORUM_PRESETS


def main():
    for name in QUORUM_PRESETS:
        m = build_preset(name).bridge.offchain.m
        n = build_preset(name).bridge.offchain.n
        print(f"{name} ({m}-of-{n})")
        for k in range(max(0, m - 2), n + 1):
            s = build_preset(name)
            s.injections[0].params["keys_compromised"] = k
            r = run_scenario(s)
            print(f"    {k} keys: {len(r.violations)} violations, loss {r.loss or 0}")


if __name__ == "__main__":
    main()
