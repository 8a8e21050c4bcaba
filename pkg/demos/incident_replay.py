"""Replay every shipped incident and print what the monitors saw.

    python3 demos/incident_replay.py
"""

from bridgesim import build_preset, preset_names, run_scenario


def main():
    for name in preset_names():
        scenario = build_preset(name)
        result = run_scenario(scenario)
        p = result.primary
        loss = ", ".join(f"{v:,} {t}" for t, v in sorted(result.loss.items())) or "none"
        print(f"{name:20s} {p.prior.value:12s} {p.classification.value:8s} "
              f"{result.attack_layer:12s} loss {loss}")
        print(f"{'':20s} {scenario.expected.citation}")
        print(f"{'':20s} first evidence at tick {p.detected_at}: {p.detail}")


if __name__ == "__main__":
    main()
