import json
import math

import numpy as np
import pytest

import performative as pf
from performative.trace import canonical_json, config_digest, read_trace_csv


def small_trace(dim=1):
    tr = pf.Trace(dim=dim, seed=3, digest="abc123")
    tr.append(0, np.zeros(dim), 0, 0, pr_est=1.5, pr_se=0.0, dist_ps=2.0 / 3.0)
    tr.append(1, np.full(dim, 0.25), 1, 10, pr_est=1.1, pr_se=0.0, dist_ps=0.5, eta=0.2)
    tr.append(2, np.full(dim, 0.4375), 2, 20, pr_est=None, pr_se=None, dist_ps=None, eta=0.1)
    return tr


class TestCanonicalForm:
    def test_canonical_json_sorts_keys(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'

    def test_digest_ignores_key_order(self):
        assert config_digest({"x": 1, "y": 2}) == config_digest({"y": 2, "x": 1})

    def test_digest_separates_values(self):
        assert config_digest({"x": 1}) != config_digest({"x": 2})


class TestAppendInvariants:
    def test_steps_strictly_increase(self):
        tr = small_trace()
        with pytest.raises(ValueError, match="increasing"):
            tr.append(2, [0.0], 3, 30)

    def test_counters_never_decrease(self):
        tr = small_trace()
        with pytest.raises(ValueError, match="deployment"):
            tr.append(3, [0.0], 1, 30)
        with pytest.raises(ValueError, match="sample"):
            tr.append(3, [0.0], 3, 5)

    def test_column_maps_missing_to_nan(self):
        tr = small_trace()
        col = tr.column("pr_est")
        assert col[1] == 1.1
        assert math.isnan(col[2])

    def test_validate_flags_non_finite(self):
        tr = small_trace()
        tr.thetas[1] = np.array([math.inf])
        with pytest.raises(ValueError, match="non-finite"):
            tr.validate()

    def test_aux_columns_collect_in_order(self):
        tr = small_trace()
        assert tr.aux["eta"] == [0.2, 0.1]


class TestSerialization:
    def test_csv_round_trip_is_exact(self, tmp_path):
        tr = small_trace()
        path = tr.to_csv(tmp_path / "trace.csv")
        cols = read_trace_csv(path)
        assert cols["k"].tolist() == [0.0, 1.0, 2.0]
        assert cols["theta_0"].tolist() == [0.0, 0.25, 0.4375]
        assert cols["dist_ps"][0] == 2.0 / 3.0  # repr floats survive the round trip bit for bit
        assert math.isnan(cols["pr_est"][2])

    def test_csv_is_deterministic(self, tmp_path):
        a = small_trace().to_csv(tmp_path / "a.csv").read_bytes()
        b = small_trace().to_csv(tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_header_matches_schema(self):
        assert small_trace(dim=2).header() == "k,theta_0,theta_1,deployments,samples,pr_est,pr_se,dist_ps,dist_po"

    def test_timestamp_only_in_sidecar(self, tmp_path):
        tr = small_trace()
        csv_text = tr.to_csv(tmp_path / "t.csv").read_text()
        sidecar = json.loads(tr.write_sidecar(tmp_path / "t.meta.json").read_text())
        assert "created_at" in sidecar
        assert "created_at" not in csv_text
        assert sidecar["config_digest"] == "abc123"
        no_stamp = tr.sidecar_dict(timestamp=False)
        assert "created_at" not in no_stamp
