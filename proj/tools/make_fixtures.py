#!/usr/bin/env python3
"""Regenerates the synthetic fixtures under fixtures/.

Everything is derived from a fixed seed so the shipped files can be
reproduced byte for byte:

    python3 tools/make_fixtures.py fixtures

The data is synthetic: one spring week (168 hourly snapshots) weighted to
represent a full year, a 5-node heat network, a 2-node toy network and a
10-bus regional grid with rooftop PV feed-in on the distribution buses.
"""

import csv
import math
import os
import random
import sys

SEED = 20150413
HOURS = 168
START_DAY = 13  # 2015-04-13 is a Monday
WEIGHT = 8760.0 / HOURS


def timestamps():
    out = []
    for h in range(HOURS):
        day, hour = divmod(h, 24)
        out.append(f"2015-04-{START_DAY + day:02d}T{hour:02d}:00")
    return out


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def r4(x):
    return f"{x:.4f}".rstrip("0").rstrip(".") if "." in f"{x:.4f}" else f"{x:.4f}"


def daily_sun(rng):
    # Cloudiness per day; day 3 is overcast.
    return [max(0.15, min(1.0, rng.gauss(0.85, 0.1))) if d != 3 else 0.2 for d in range(7)]


def solar_shape(hour):
    if hour < 6 or hour > 20:
        return 0.0
    return math.sin(math.pi * (hour - 6) / 14.0) ** 1.5


def weather(rng, sun, mean_temp, amp):
    rows = []
    for h in range(HOURS):
        day, hour = divmod(h, 24)
        temp = mean_temp + amp * math.sin(2 * math.pi * (hour - 9) / 24.0) + rng.gauss(0, 0.6)
        cf = 0.72 * sun[day] * solar_shape(hour)
        rows.append((temp, min(1.0, max(0.0, cf))))
    return rows


def demand_shape(hour, temp):
    morning = math.exp(-((hour - 7) ** 2) / 6.0)
    evening = 0.6 * math.exp(-((hour - 19) ** 2) / 8.0)
    base = 0.55 + 0.02 * (12.0 - temp)
    return max(0.2, base + 0.35 * morning + 0.25 * evening)


def prices(rng, sun, tariff=0.0, green_gas=92.0):
    rows = []
    for h in range(HOURS):
        day, hour = divmod(h, 24)
        evening = 55.0 * math.exp(-((hour - 19) ** 2) / 5.0)
        morning = 25.0 * math.exp(-((hour - 8) ** 2) / 4.0)
        solar_dip = 75.0 * sun[day] * solar_shape(hour)
        elec = max(2.0, 75.0 + evening + morning - solar_dip + rng.gauss(0, 4.0)) + tariff
        hydrogen = 105.0 + rng.gauss(0, 1.5)
        rows.append((elec, hydrogen, green_gas, 4.0, 12.0))
    return rows


def heat5(root, rng, ts, sun, wx_variants):
    d = os.path.join(root, "heat5")
    series = os.path.join(d, "series")
    write_csv(os.path.join(series, "snapshots.csv"), ["timestamp", "weight"],
              [(t, repr(WEIGHT)) for t in ts])

    wx = wx_variants["default"]
    peaks = {"N1": 95.0, "N2": 55.0, "N3": 45.0, "N4": 40.0, "N5": 35.0}
    rows = []
    for h in range(HOURS):
        hour = h % 24
        shape = demand_shape(hour, wx[h][0])
        rows.append([ts[h]] + [r4(p * shape * (1 + rng.gauss(0, 0.02))) for p in peaks.values()])
    write_csv(os.path.join(series, "demand.csv"), ["timestamp"] + list(peaks), rows)

    # Electricity carries a network tariff; with green gas at 75 EUR/MWh a
    # design without power-to-heat stays within a 10 % cost slack.
    pr = prices(rng, sun, tariff=20.0, green_gas=75.0)
    write_csv(os.path.join(series, "prices.csv"),
              ["timestamp", "electricity", "hydrogen", "green_gas", "waste", "residual_heat"],
              [[ts[h]] + [r4(v) for v in pr[h]] for h in range(HOURS)])

    for name, rows_wx in wx_variants.items():
        fname = "weather.csv" if name == "default" else f"weather_{name}.csv"
        write_csv(os.path.join(series, fname), ["timestamp", "ambient_temperature", "solar_thermal_cf"],
                  [[ts[h], r4(rows_wx[h][0]), r4(rows_wx[h][1])] for h in range(HOURS)])

    # Residual heat follows a weekday shift pattern (synthetic, not measured).
    avail = []
    for h in range(HOURS):
        day, hour = divmod(h, 24)
        on = 0.9 if (day < 5 and 6 <= hour < 22) else 0.35
        avail.append([ts[h], r4(on)])
    write_csv(os.path.join(series, "availability.csv"), ["timestamp", "residual_N3"], avail)

    write_csv(os.path.join(d, "nodes.csv"), ["id", "demand"],
              [(n, f"demand.{n}") for n in peaks])

    hdr = ["id", "node", "kind", "potential_capacity", "availability", "to_node", "length_m", "h_max"]
    assets = [
        ("gb_N1", "N1", "gas_boiler_greengas", 150, "", "", "", ""),
        ("chp_N1", "N1", "chp_greengas", 80, "", "", "", ""),
        ("hp_N1", "N1", "heat_pump", 60, "", "", "", ""),
        ("eb_N1", "N1", "electric_boiler", 100, "", "", "", ""),
        ("tes_N1", "N1", "tes_short_term", 80, "", "", "", ""),
        ("geo_N2", "N2", "geothermal", 40, "", "", "", ""),
        ("h2b_N2", "N2", "gas_boiler_hydrogen", 100, "", "", "", ""),
        ("eb_N2", "N2", "electric_boiler", 60, "", "", "", ""),
        ("wte_N3", "N3", "waste_to_energy", 30, "", "", "", ""),
        ("rh_N3", "N3", "residual_heat", 40, "availability.residual_N3", "", "", ""),
        ("ates_N3", "N3", "ht_ates", 50, "", "", "", 200),
        ("st_N4", "N4", "solar_thermal", 80, "", "", "", ""),
        ("hp_N4", "N4", "heat_pump", 40, "", "", "", ""),
        ("chp_N4", "N4", "chp_hydrogen", 60, "", "", "", ""),
        ("gb_N5", "N5", "gas_boiler_greengas", 80, "", "", "", ""),
        ("eb_N5", "N5", "electric_boiler", 40, "", "", "", ""),
        ("pipe_N1_N2", "N1", "pipeline", 250, "", "N2", 3000, ""),
        ("pipe_N2_N3", "N2", "pipeline", 250, "", "N3", 4000, ""),
        ("pipe_N1_N4", "N1", "pipeline", 250, "", "N4", 5000, ""),
        ("pipe_N4_N5", "N4", "pipeline", 250, "", "N5", 3000, ""),
        ("pipe_N3_N5", "N3", "pipeline", 250, "", "N5", 6000, ""),
    ]
    write_csv(os.path.join(d, "assets.csv"), hdr, assets)
    write_csv(os.path.join(d, "bus_map.csv"), ["node", "bus"],
              [("N1", "B7"), ("N2", "B4"), ("N3", "B8"), ("N4", "B9"), ("N5", "B6")])
    with open(os.path.join(d, "system.yaml"), "w") as f:
        f.write("# Network supply temperature and air-source COP regression.\n"
                "# a1 is negated relative to the published default so COP falls with\n"
                "# the temperature lift; the booster coupling needs SPF > COP.\n"
                "sink_temperature: 80\n"
                "cop:\n  a0: 6.81\n  a1: -0.121\n  a2: 0.00063\n")


def toy2(root, rng, ts, sun, wx):
    d = os.path.join(root, "toy2")
    series = os.path.join(d, "series")
    write_csv(os.path.join(series, "snapshots.csv"), ["timestamp", "weight"],
              [(t, repr(WEIGHT)) for t in ts])
    rows = []
    for h in range(HOURS):
        shape = demand_shape(h % 24, wx[h][0])
        rows.append([ts[h], r4(20.0 * shape), r4(12.0 * shape)])
    write_csv(os.path.join(series, "demand.csv"), ["timestamp", "A", "B"], rows)
    pr = prices(rng, sun)
    write_csv(os.path.join(series, "prices.csv"), ["timestamp", "electricity", "green_gas"],
              [[ts[h], r4(pr[h][0]), r4(pr[h][2])] for h in range(HOURS)])
    write_csv(os.path.join(series, "weather.csv"), ["timestamp", "ambient_temperature", "solar_thermal_cf"],
              [[ts[h], r4(wx[h][0]), r4(wx[h][1])] for h in range(HOURS)])
    write_csv(os.path.join(d, "nodes.csv"), ["id", "demand"], [("A", "demand.A"), ("B", "demand.B")])
    write_csv(os.path.join(d, "assets.csv"),
              ["id", "node", "kind", "potential_capacity", "to_node", "length_m"],
              [("gb_A", "A", "gas_boiler_greengas", 60, "", ""),
               ("eb_A", "A", "electric_boiler", 40, "", ""),
               ("tes_A", "A", "tes_short_term", 20, "", ""),
               ("st_B", "B", "solar_thermal", 30, "", ""),
               ("pipe_A_B", "A", "pipeline", 250, "B", 2000)])
    write_csv(os.path.join(d, "bus_map.csv"), ["node", "bus"], [("A", "B7"), ("B", "B4")])


def grid10(root, rng, ts, sun):
    # 150 kV slack, a 50 kV regional ring and three 20 kV stations. The DHN
    # buses B7 and B9 host large PV parks; at B7 the midday export exceeds
    # the station transformer unless local load (power-to-heat) absorbs it.
    d = os.path.join(root, "grid10")
    write_csv(os.path.join(d, "buses.csv"), ["id", "vn_kv", "type"],
              [("B0", 150, "reference"), ("B1", 50, "PQ"), ("B2", 50, "PQ"), ("B3", 50, "PQ"),
               ("B4", 50, "PQ"), ("B5", 50, "PQ"), ("B6", 50, "PQ"), ("B7", 20, "PQ"),
               ("B8", 20, "PQ"), ("B9", 20, "PQ")])
    write_csv(os.path.join(d, "lines.csv"),
              ["id", "from", "to", "r_ohm", "x_ohm", "b_us", "rating_mva"],
              [("L1", "B1", "B3", 0.6, 2.4, 25, 150),
               ("L2", "B3", "B4", 0.8, 3.2, 30, 90),
               ("L3", "B2", "B5", 0.6, 2.4, 25, 120),
               ("L4", "B5", "B6", 0.9, 3.6, 35, 90),
               ("L5", "B4", "B6", 1.2, 4.8, 45, 60)])
    write_csv(os.path.join(d, "trafos.csv"),
              ["id", "hv_bus", "lv_bus", "vk_percent", "vkr_percent", "rating_mva"],
              [("T1", "B0", "B1", 12.0, 0.4, 200), ("T2", "B0", "B2", 12.0, 0.4, 200),
               ("T3", "B3", "B7", 6.0, 0.5, 60), ("T4", "B5", "B8", 6.0, 0.5, 40),
               ("T5", "B6", "B9", 6.0, 0.5, 40)])

    prof = os.path.join(d, "baseline_profiles")
    load_peak = {"B3": 20.0, "B4": 15.0, "B5": 20.0, "B6": 15.0, "B7": 8.0, "B8": 6.0, "B9": 6.0}
    pv_peak = {"B4": 10.0, "B7": 130.0, "B8": 25.0, "B9": 25.0}
    for bus in ["B3", "B4", "B5", "B6", "B7", "B8", "B9"]:
        rows = []
        for h in range(HOURS):
            day, hour = divmod(h, 24)
            load = load_peak[bus] * (0.55 + 0.3 * math.exp(-((hour - 8) ** 2) / 6.0)
                                     + 0.45 * math.exp(-((hour - 19) ** 2) / 6.0))
            pv = pv_peak.get(bus, 0.0) * sun[day] * solar_shape(hour)
            rows.append([ts[h], r4(load * (1 + rng.gauss(0, 0.03))), r4(pv)])
        write_csv(os.path.join(prof, f"{bus}.csv"), ["timestamp", "p_load_mw", "p_gen_mw"], rows)


def scenarios(root):
    d = os.path.join(root, "scenarios")
    os.makedirs(d, exist_ok=True)
    with open(os.path.join(d, "plan_desk.yaml"), "w") as f:
        f.write("# Desk-scale run plan: 4 intensification runs of 4 plus one diversification run.\n"
                "weights:\n  a: 1\n  b: 10\n"
                "runs:\n"
                "  - {target: electrification, direction: maximize, batch_size: 4}\n"
                "  - {target: electrification, direction: minimize, batch_size: 4}\n"
                "  - {target: geothermal, direction: maximize, batch_size: 4}\n"
                "  - {target: molecule, direction: minimize, batch_size: 4}\n"
                "diversification:\n  batch_size: 4\n")
    presets = ("presets:\n"
               "  no_geothermal:\n    - \"cap:geothermal == 0\"\n"
               "  limited_gas_boilers:\n    - \"cap:gas_boilers <= 0.2*peak_demand\"\n"
               "  no_geothermal_limited_gas:\n    - \"cap:geothermal == 0\"\n"
               "    - \"cap:gas_boilers <= 0.2*peak_demand\"\n"
               "  no_p2h:\n    - \"cap:electrification == 0\"\n")
    with open(os.path.join(d, "toy.yaml"), "w") as f:
        f.write("# Default desk-scale scenario on the synthetic fixtures.\n"
                "system: ../heat5\ngrid: ../grid10\nplan: plan_desk.yaml\n"
                "output_dir: ../../out/toy\n"
                "slack: 0.10\ndiscount_rate: 0.07\ndemand_scale: 1.0\nweather_year: \"\"\n"
                "power_factor: 0.95\nloading_limit: 110\noverload_window: 7\n" + presets)


def main():
    root = sys.argv[1] if len(sys.argv) > 1 else "fixtures"
    rng = random.Random(SEED)
    ts = timestamps()
    sun = daily_sun(rng)
    wx_default = weather(rng, sun, 9.0, 4.0)
    wx_warm = weather(rng, [min(1.0, s * 1.1) for s in sun], 13.0, 5.0)
    wx_cold = weather(rng, [s * 0.4 for s in sun], 1.0, 3.0)
    heat5(root, rng, ts, sun, {"default": wx_default, "2004": wx_warm, "1987": wx_cold})
    toy2(root, rng, ts, sun, wx_default)
    grid10(root, rng, ts, sun)
    scenarios(root)


if __name__ == "__main__":
    main()
