import json
from pathlib import Path

import numpy as np
import pytest

from src.analysis.protection import force_attack_range, no_guardian_range, stealth_attack_range
from src.nodes.victim import Victim
from src.protocol.frame_codec import FrameType
from src.simulation.coordinator import EventKind, SimulationCoordinator, build_flow_frame, run
from src.simulation.loader import load_scenario, scenario_from_dict
from src.simulation.report import CSV_COLUMNS, report_to_csv, report_to_json, save_report
from src.utils.errors import ScenarioValidationError
from src.utils.schemas import NodeSpec, RfParams, TrafficFlow

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

DROP_PAN_22 = "gtables -A -m dst --pan 0x22 -j DROP"


def scenario_data(name):
    with open(SCENARIOS / name) as f:
        return json.load(f)


def assert_conserved(report):
    for flow_id, totals in report.flows.items():
        assert totals.sent == totals.received + totals.destroyed + totals.below_sensitivity, flow_id
    for row in report.rows:
        assert row.sent == row.received + row.destroyed + row.below_sensitivity


def test_event_order_is_time_then_node_then_sequence():
    coordinator = SimulationCoordinator(load_scenario(SCENARIOS / "ota_blocking.json"))
    fired = []
    coordinator._dispatch = lambda event: fired.append((event.time_us, event.node_id, event.payload))
    coordinator.schedule_event(10.0, "rogue", EventKind.FRAME_DUE, 1)
    coordinator.schedule_event(10.0, "g1", EventKind.COMMIT, 2)
    coordinator.schedule_event(5.0, "rogue", EventKind.FRAME_END, 3)
    coordinator.schedule_event(10.0, "g1", EventKind.CLASSIFY, 4)
    coordinator.schedule_event(10.0, "bulb", EventKind.FRAME_END, 5)
    coordinator.env.run()
    assert fired == [
        (5.0, "rogue", 3),
        (10.0, "bulb", 5),
        (10.0, "g1", 2),
        (10.0, "g1", 4),
        (10.0, "rogue", 1),
    ]


def test_empty_scenario_yields_header_only():
    report = run(load_scenario(SCENARIOS / "empty.json"))
    assert report.rows == []
    assert report_to_csv(report) == ",".join(CSV_COLUMNS) + "\n"
    assert report.jam_transmissions == 0


def test_run_rejects_non_scenarios():
    with pytest.raises(ScenarioValidationError):
        run({"duration_s": 1.0})


def test_run_is_deterministic():
    scenario = load_scenario(SCENARIOS / "broadcast_protection.json")
    first, second = run(scenario), run(scenario)
    assert report_to_csv(first) == report_to_csv(second)
    assert report_to_json(first) == report_to_json(second)


def test_rows_cover_every_interval_and_flow():
    data = scenario_data("ota_blocking.json")
    data["report_interval_s"] = 2.5
    report = run(scenario_from_dict(data))
    assert [(row.interval_start_s, row.flow_id) for row in report.rows[:4]] == [
        (0.0, "ota"),
        (0.0, "control"),
        (2.5, "ota"),
        (2.5, "control"),
    ]
    assert len(report.rows) == 4 * 2
    assert sum(row.sent for row in report.rows if row.flow_id == "ota") == report.flows["ota"].sent == 50


def test_without_guardians_nothing_is_destroyed():
    data = scenario_data("broadcast_protection.json")
    data["nodes"] = [node for node in data["nodes"] if node["role"] != "guardian"]
    report = run(scenario_from_dict(data))
    assert report.jam_transmissions == 0
    for totals in report.flows.values():
        assert totals.destroyed == 0
        assert totals.false_pos == 0
    assert_conserved(report)


def test_ota_commands_are_blocked_and_other_commands_pass():
    report = run(load_scenario(SCENARIOS / "ota_blocking.json"))
    ota, control = report.flows["ota"], report.flows["control"]
    assert ota.sent == 50
    assert ota.destroyed == ota.sent
    assert ota.false_neg == 0
    assert control.received == control.sent == 50
    assert control.false_pos == 0
    assert report.jam_transmissions == 50
    assert ota.jam_airtime_us == pytest.approx(50 * 26.0)
    assert report.nodes["g1"].jams == 50


def test_broadcast_protection_without_shadowing():
    data = scenario_data("broadcast_protection.json")
    data["rf"] = {}
    report = run(scenario_from_dict(data))
    broadcast, unicast = report.flows["broadcast"], report.flows["unicast"]
    assert broadcast.destroyed == broadcast.sent > 0
    assert unicast.received == unicast.sent > 0
    assert broadcast.false_pos == unicast.false_pos == 0
    # both guardians jam every broadcast frame
    assert report.jam_transmissions == 2 * broadcast.sent


def test_conservation_with_shadowing_and_crowding():
    for name in ("broadcast_protection.json", "flood_rss.json"):
        assert_conserved(run(load_scenario(SCENARIOS / name)))


def test_rss_rule_separates_outside_and_inside_senders():
    report = run(load_scenario(SCENARIOS / "flood_rss.json"))
    for flow_id in ("out1", "out2", "out3"):
        totals = report.flows[flow_id]
        assert totals.sent == 2000
        assert totals.destroyed == totals.sent
    for flow_id in ("in1", "in2", "in3"):
        totals = report.flows[flow_id]
        assert totals.sent == 200
        assert totals.received == totals.sent
    assert all(totals.false_pos == 0 and totals.false_neg == 0 for totals in report.flows.values())


def test_adding_a_guardian_never_helps_the_attacker():
    data = scenario_data("broadcast_protection.json")
    both = run(scenario_from_dict(data))
    data["nodes"] = [node for node in data["nodes"] if node["id"] != "g2"]
    single = run(scenario_from_dict(data))
    assert both.flows["broadcast"].destroyed >= single.flows["broadcast"].destroyed


def test_revocation_timeline():
    report = run(load_scenario(SCENARIOS / "revocation.json"))
    revoked = {"m1", "m2", "m5"}

    for flow_id, totals in report.flows.items():
        if flow_id in revoked:
            assert totals.destroyed > 0
            # one leaked frame per revocation, one lost frame when the chain is emptied
            assert totals.false_neg <= 2
            assert totals.false_pos <= 1
        else:
            assert totals.false_pos == 0
            assert totals.destroyed == 0
            assert totals.received == totals.sent

    rows = {(row.interval_start_s, row.flow_id): row for row in report.rows}
    for start in (80.0, 150.0, 190.0, 230.0):
        row = rows[(start, "m1")]
        assert row.destroyed == row.sent == 100
    assert rows[(160.0, "m2")].destroyed == rows[(160.0, "m2")].false_pos <= 1
    assert rows[(170.0, "m2")].destroyed == 0
    assert rows[(60.0, "m5")].destroyed == 0
    assert rows[(70.0, "m1")].false_neg <= 1
    assert rows[(180.0, "m5")].false_neg <= 1


def test_update_keeping_a_drop_rule_never_leaks():
    standing = "gtables -A -m dst --addr 0xFFFF --pan 0x22 -j DROP"
    data = {
        "nodes": [
            {"id": "g1", "role": "guardian", "position": [0.0, 0.0], "tx_power_dbm": 10.0, "rules": [standing],
             "timing": {"decision": {"variant": "fpga"}}},
            {"id": "v1", "role": "victim", "position": [5.0, 0.0], "addr": "0x0001"},
            {"id": "a1", "role": "attacker", "position": [10.0, 0.0], "tx_power_dbm": 0.0},
        ],
        "flows": [
            {"id": "broadcast", "src": "a1", "dst": "v1", "rate": 20.0, "window": [0.0, 2.0],
             "template": {"dst_addr": "0xFFFF"}},
        ],
        "rule_updates": [
            {"time_s": 1.0, "guardian": "g1", "rules": [standing, "gtables -A -m src --addr 0x1234 -j DROP"]},
        ],
        "reconfig_latency": 200000.0,
        "duration_s": 2.0,
    }
    totals = run(scenario_from_dict(data)).flows["broadcast"]
    assert totals.sent == 40
    assert totals.received == 0
    assert totals.destroyed == 40
    assert totals.false_neg == totals.false_pos == 0


def test_classification_waits_for_bytes_a_commit_asks_for():
    deep = "gtables -A -m raw_byte --offset 30 --value 0x00 -j DROP"
    data = {
        "nodes": [
            {"id": "g1", "role": "guardian", "position": [0.0, 0.0], "tx_power_dbm": 10.0,
             "timing": {"decision": {"variant": "fpga"}}},
            {"id": "v1", "role": "victim", "position": [5.0, 0.0], "addr": "0x0001"},
            {"id": "a1", "role": "attacker", "position": [10.0, 0.0], "tx_power_dbm": 0.0},
        ],
        "flows": [{"id": "x", "src": "a1", "dst": "v1", "rate": 1.0, "window": [0.0, 1.0]}],
        # commits while the first frame is still in its header
        "rule_updates": [{"time_s": 0.0, "guardian": "g1", "rules": [deep]}],
        "reconfig_latency": 100.0,
        "duration_s": 1.0,
    }
    coordinator = SimulationCoordinator(scenario_from_dict(data))
    report = coordinator.run()
    assert report.flows["x"].destroyed == 1
    jam = coordinator.nodes["g1"].get_recent_events(kind="jam")[0]
    assert jam.time_us == 30 * 32 + 4.0
    assert jam.detail["start"] == 30 * 32 + 4.0 + 10.0 + 3.0


def test_stealthy_attacker_abstains_without_a_window():
    data = {
        "nodes": [
            {"id": "g1", "role": "guardian", "position": [0.0, 0.0], "rules": [DROP_PAN_22]},
            {"id": "v1", "role": "victim", "position": [10.0, 0.0], "addr": "0x0001"},
            # closer to the guardian than to the victim
            {"id": "a1", "role": "attacker", "position": [-2.0, 0.0], "tx_power_dbm": 10.0},
        ],
        "flows": [{"id": "x", "src": "a1", "dst": "v1", "rate": 10.0, "window": [0.0, 1.0], "strategy": "stealthy"}],
        "duration_s": 1.0,
    }
    totals = run(scenario_from_dict(data)).flows["x"]
    assert totals.sent == 0
    assert totals.abstained == 10


def test_successful_injections_respect_attack_range_bounds():
    rng = np.random.default_rng(2024)
    rf = RfParams()
    successes = 0
    for _ in range(1000):
        d_gv = float(rng.uniform(1.0, 30.0))
        d_av = float(rng.uniform(0.5, 60.0))
        attacker_x = d_gv + d_av * (1.0 if rng.random() < 0.5 else -1.0)
        if abs(attacker_x) < 0.1:
            continue
        pa = float(rng.uniform(-10.0, 20.0))
        pg = float(rng.uniform(0.0, 20.0))
        sg = float(rng.uniform(-116.0, -95.0))
        strategy = "stealthy" if rng.random() < 0.5 else "fixed_power"

        data = {
            "nodes": [
                {
                    "id": "g",
                    "role": "guardian",
                    "position": [0.0, 0.0],
                    "tx_power_dbm": pg,
                    "sensitivity_dbm": sg,
                    "rules": [DROP_PAN_22],
                    "timing": {"decision": {"variant": "fpga"}},
                },
                {"id": "v", "role": "victim", "position": [d_gv, 0.0], "addr": "0x0001"},
                {"id": "a", "role": "attacker", "position": [attacker_x, 0.0], "tx_power_dbm": pa},
            ],
            "flows": [{"id": "inj", "src": "a", "dst": "v", "rate": 100.0, "window": [0.0, 0.01], "strategy": strategy}],
            "duration_s": 0.01,
        }
        totals = run(scenario_from_dict(data)).flows["inj"]
        if totals.received == 0:
            continue
        successes += 1
        bound = max(
            stealth_attack_range(-94.0, sg, d_gv, rf.alpha),
            force_attack_range(pa, pg, rf.gamma_eff_db, d_gv, rf.alpha),
        )
        assert d_av <= bound * (1 + 1e-9)
        assert d_av <= no_guardian_range(pa, -94.0, rf) * (1 + 1e-9)
    assert successes > 0


def make_victim(node_id, addr):
    return Victim(NodeSpec(id=node_id, role="victim", position=(0.0, 0.0), addr=addr))


def test_build_flow_frame_templates():
    src, dst = make_victim("s", 0x0BAD), make_victim("d", 0x2001)

    ota = TrafficFlow(
        src="s", dst="d", pan=0xACAC, rate=1.0, window=(0.0, 1.0),
        template={"payload_len": 15, "nw_ctrl": "0x0008", "asl_cmd": "0x01"},
    )
    frame = build_flow_frame(ota, src, dst, 5)
    assert frame.frame_type == FrameType.DATA
    assert (frame.dst_pan, frame.dst_addr, frame.src_addr) == (0xACAC, 0x2001, 0x0BAD)
    assert frame.nw_ctrl == 0x0008
    assert frame.asl_cmd == 0x01
    assert frame.total_bytes == 32

    broadcast = TrafficFlow(src="s", dst="d", rate=1.0, window=(0.0, 1.0), template={"dst_addr": "0xFFFF"})
    assert build_flow_frame(broadcast, src, dst, 0).dst_addr == 0xFFFF

    control = TrafficFlow(src="s", dst="d", rate=1.0, window=(0.0, 1.0), template={"frame_type": "control", "payload_len": 2})
    frame = build_flow_frame(control, src, dst, 0)
    assert frame.frame_type == FrameType.COMMAND
    assert frame.fcf == 0xC823
    assert frame.payload[0] == 0x01
    assert frame.src_addr == src.spec.extended_address

    beacon = TrafficFlow(src="s", dst="d", rate=1.0, window=(0.0, 1.0), template={"frame_type": "beacon"})
    assert build_flow_frame(beacon, src, dst, 0).frame_type == FrameType.BEACON
    ack = TrafficFlow(src="s", dst="d", rate=1.0, window=(0.0, 1.0), template={"frame_type": "ack"})
    assert build_flow_frame(ack, src, dst, 9).frame_type == FrameType.ACK


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d["flows"][0].update(dst="nobody"),
        lambda d: d["flows"][0].update(dst="g1"),
        lambda d: d["flows"][0].update(window=[0.0, 99.0]),
        lambda d: d["nodes"][0].update(rules=["gtables -A -m bogus -j DROP"]),
        lambda d: d["nodes"][0].update(rules=["missing.rules"]),
        lambda d: d.update(rule_updates=[{"time_s": 1.0, "guardian": "bulb", "rules": []}]),
        lambda d: d.update(duration_s=-1.0),
        # rogue sits on its victim
        lambda d: d["nodes"][3].update(position=[4.0, 0.0]),
        lambda d: d["nodes"][0].update(position=[8.0, 3.0]),
    ],
)
def test_invalid_scenarios_are_rejected(mutate, tmp_path):
    data = scenario_data("ota_blocking.json")
    mutate(data)
    with pytest.raises(ScenarioValidationError):
        scenario_from_dict(data, tmp_path)


def test_colocated_nodes_without_a_link_are_accepted():
    data = scenario_data("ota_blocking.json")
    # two guardians are never a link
    data["nodes"].append({"id": "g2", "role": "guardian", "position": [0.0, 0.0], "rules": []})
    assert len(scenario_from_dict(data).nodes) == 5


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ScenarioValidationError):
        load_scenario(tmp_path / "absent.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ScenarioValidationError):
        load_scenario(broken)


def test_rule_files_are_inlined_relative_to_the_scenario():
    scenario = load_scenario(SCENARIOS / "revocation.json")
    first_update = scenario.rule_updates[0]
    assert len(first_update.rules) == 3
    assert all(line.startswith("gtables") for line in first_update.rules)
    assert scenario.rule_updates[1].rules == []
    assert scenario.effective_reconfig_latency == 1e5


def test_save_report_writes_csv_and_summary(tmp_path):
    report = run(load_scenario(SCENARIOS / "ota_blocking.json"))
    csv_path, summary_path = tmp_path / "ota.csv", tmp_path / "ota.summary.json"
    save_report(report, csv_path, summary_path)

    lines = csv_path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1] == "0.000,ota,5,0,5,0,0,0,130.00"
    assert len(lines) == 1 + 10 * 2
    summary = json.loads(summary_path.read_text())
    assert summary["jam_transmissions"] == 50
    assert summary["flows"]["control"]["received"] == 50
    assert summary["jam_duty_cycle"] == pytest.approx(1300.0 / 10e6)
