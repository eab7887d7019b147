#!/usr/bin/env python3
"""Writes the bundled 48-interval load/PV profile (07:00-19:00, 15 min).

Residential feeder on a 2 MVA base: phase loads follow a morning and an
evening peak, rooftop PV is unevenly spread over the phases and sees a few
passing clouds. Seeded, so the output is reproducible.
"""
import argparse
import csv
import math
import random

LOAD_BASE_W = (210e3, 260e3, 190e3)
LOAD_SWING_W = (90e3, 110e3, 80e3)
PV_PEAK_W = (420e3, 140e3, 300e3)
SUNRISE_H, SUNSET_H = 6.4, 19.6


def load_shape(h):
    morning = math.exp(-((h - 8.0) / 1.3) ** 2)
    evening = math.exp(-((h - 18.5) / 1.6) ** 2)
    midday = 0.35 * math.exp(-((h - 12.5) / 2.0) ** 2)
    return morning + 1.3 * evening + midday


def clear_sky(h):
    if h <= SUNRISE_H or h >= SUNSET_H:
        return 0.0
    return math.sin(math.pi * (h - SUNRISE_H) / (SUNSET_H - SUNRISE_H)) ** 1.5


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--seed", type=int, default=20240607)
    args = ap.parse_args()
    rng = random.Random(args.seed)

    cloud = 1.0
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["interval", "load_p_a_w", "load_p_b_w", "load_p_c_w", "pv_p_a_w", "pv_p_b_w", "pv_p_c_w"])
        for k in range(48):
            h = 7.0 + 0.25 * k
            # cloud cover as a mean-reverting walk with occasional dips
            cloud = min(1.0, max(0.3, cloud + 0.3 * (1.0 - cloud) + rng.gauss(0.0, 0.06)))
            if rng.random() < 0.08:
                cloud *= rng.uniform(0.4, 0.7)
            loads = [b + s * load_shape(h) * rng.uniform(0.93, 1.07) for b, s in zip(LOAD_BASE_W, LOAD_SWING_W)]
            pv = [p * clear_sky(h) * cloud * rng.uniform(0.97, 1.03) for p in PV_PEAK_W]
            label = f"{int(h):02d}:{int(round((h % 1) * 60)):02d}"
            w.writerow([label] + [f"{x:.0f}" for x in loads + pv])


if __name__ == "__main__":
    main()
