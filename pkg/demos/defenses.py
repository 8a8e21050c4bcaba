"""Each defense against each incident, compared with the undefended loss."""

import dataclasses

from bridgesim import build_preset, preset_names, run_scenario
from bridgesim.presets import with_layered_validation


def _with(**kw):
    def apply(s):
        s.bridge.defenses = dataclasses.replace(s.bridge.defenses, **kw)
        return s
    return apply


DEFENSES = {
    "breaker 10k": _with(breaker_cap=10_000),
    "buffer 3 + trip": _with(buffer_delay=3, breaker_on_monitor_trip=True),
    "challenge 5": _with(challenge_period=5),
    "layered": with_layered_validation,
}


def _fmt(loss):
    return ", ".join(f"{v:,} {t}" for t, v in sorted(loss.items())) or "0"


def main():
    for name in preset_names():
        base = run_scenario(build_preset(name))
        print(f"{name}: undefended {_fmt(base.loss)}")
        for label, apply in DEFENSES.items():
            r = run_scenario(apply(build_preset(name)))
            extra = f" (latency {r.detection_latency})" if r.detection_latency is not None else ""
            print(f"    {label:16s} {_fmt(r.loss)}{extra}")


if __name__ == "__main__":
    main()
