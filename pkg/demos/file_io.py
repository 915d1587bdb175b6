"""Round-trip through the file formats and the run-record log.

Writes a small hMetis file, partitions it through the same path the
CLI uses, saves the partition and a JSON-lines record, then reads
both back.
"""

import json
import tempfile
from fractions import Fraction
from pathlib import Path

from detpart import partition, preset_config
from detpart.io import (
    RunRecord,
    append_run_record,
    assignment_digest,
    load_instance,
    read_run_records,
    write_partition,
)

# 1-indexed hMetis: header is "num_edges num_vertices", then one line
# of pin ids per edge.
HGR = """\
% tiny example: two triangles and a bridge
5 6
1 2 3
1 3
4 5 6
4 6
3 4
"""

workdir = Path(tempfile.mkdtemp(prefix="detpart-demo-"))
hgr_path = workdir / "tiny.hgr"
hgr_path.write_text(HGR)

hg = load_instance(hgr_path)
print("loaded:", hg)

res = partition(hg, k=2, epsilon=Fraction(3, 100), seed=1,
                cfg=preset_config("detjet"))
state = res.state

part_path = workdir / "tiny.part"
write_partition(part_path, state.assignment)
print("partition file:", part_path.read_text().split())

record = RunRecord(
    instance=str(hgr_path),
    k=2,
    epsilon="0.03",
    seed=1,
    threads=1,
    preset="detjet",
    metric=state.metric(),
    imbalance=str(state.imbalance()),
    balanced=state.is_balanced(),
    partition_hash=assignment_digest(state.assignment),
    timings={key: round(val, 4) for key, val in res.timings.items()},
)
log_path = workdir / "runs.jsonl"
append_run_record(log_path, record)

loaded = read_run_records(log_path)[0]
print("record:", json.dumps(loaded, indent=2, sort_keys=True))
