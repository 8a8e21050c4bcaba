"""A fee-paying round trip with no adversary: the monitors stay quiet.

Prints the per-account balances before and after, so the fee identities
can be read off directly.
"""

from pathlib import Path

from bridgesim import Simulation
from bridgesim.config import load_config

CONFIG = Path(__file__).resolve().parent.parent / "tests" / "data" / "honest.json"


def main():
    scenario = load_config(CONFIG)
    result = Simulation(scenario).run()
    print(f"scenario {result.scenario}: {len(result.violations)} violations, loss {result.loss}")
    for record in sorted(result.records, key=lambda r: r.transfer_id):
        f1, f2, f_star = record.fees_paid
        print(f"  {record.transfer_id} {record.direction:8s} v_x={record.v_x} "
              f"f1={f1} f2={f2} f*={f_star} -> {record.status.value}")
    for chain, per in sorted(result.final_balances.items()):
        for addr, held in sorted(per.items()):
            if held:
                print(f"  {chain}:{addr} {dict(held)}")


if __name__ == "__main__":
    main()
