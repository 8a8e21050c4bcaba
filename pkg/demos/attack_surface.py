"""Attack-surface areas and trust sets for the shipped configs."""

from bridgesim import build_preset, preset_names
from bridgesim.bridge import trust_set_of
from bridgesim.surface import total_area


def main():
    print(f"{'preset':20s} src  off  dest  total  trust")
    for name in preset_names():
        s = build_preset(name)
        a = total_area(s.bridge, s.catalog)
        t = trust_set_of(s.bridge)
        print(f"{name:20s} {a.area_src:3d}  {a.area_off:3d}  {a.area_dest:4d}  {a.area_total:5d}  "
              f"{t.classification.value} (size {t.size})")


if __name__ == "__main__":
    main()
