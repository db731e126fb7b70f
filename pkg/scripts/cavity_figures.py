"""Print waist, linewidth and related figures for the bundled resonators.

    python scripts/cavity_figures.py [--layout path/to/layout.json ...]
"""
import argparse
from opasqueeze.cavity import layout_summary
from opasqueeze.config import layout_from_doc, load_config, validate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--layout", nargs="+",
                    default=["builtin:opa_cavity", "builtin:shg_cavity", "builtin:planar_cavity"])
    args = ap.parse_args()
    for ref in args.layout:
        doc, _ = load_config(ref)
        validate("cavity", doc)
        layout, loss = layout_from_doc(doc)
        s = layout_summary(layout, loss)
        print(f"== {doc.get('name', ref)}")
        print(f"   optical round trip {s['optical_round_trip_length_m'] * 1e3:.3f} mm, "
              f"FSR {s['free_spectral_range_Hz'] / 1e9:.4f} GHz, finesse {s['finesse']:.2f}, "
              f"FWHM {s['fwhm_Hz'] / 1e6:.2f} MHz")
        if s["stable"]:
            print(f"   waist {s['waist_radius_m'] * 1e6:.2f} um at {s['waist_position_m'] * 1e3:.2f} mm, "
                  f"stability {s['stability_parameter']:.4f}")
        else:
            print(f"   no stable eigenmode (stability parameter {s['stability_parameter']:.4g})")


if __name__ == "__main__":
    main()
