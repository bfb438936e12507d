import json

import pytest
from fastapi.testclient import TestClient

from ifwer.masking import MaskedPair, MaskingScheme, invert, mask
from ifwer.service import create_app

TENT02 = {"variant": "tent", "p_star": 0.2}


def make_client(tmp_path=None, journal_dir=False):
    app = create_app(journal_dir=tmp_path if journal_dir else None)
    return TestClient(app)


def create_session(client, pvalues, config=None, covariates=None):
    body = {
        "pvalues": pvalues,
        "config": config or {"scheme": TENT02, "alpha": 0.2},
    }
    if covariates is not None:
        body["covariates"] = covariates
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 201, resp.text
    return resp.json()


class TestSessionLifecycle:
    def test_three_hypothesis_trace(self):
        client = make_client()
        created = create_session(client, [0.01, 0.5, 0.9])
        sid = created["session_id"]
        assert created["view"]["stopped"] is False

        r = client.get(f"/sessions/{sid}/result")
        assert r.status_code == 409  # conflict until stopped

        r = client.post(f"/sessions/{sid}/exclude", json={"indices": [2]})
        assert r.status_code == 200 and r.json()["stopped"] is False

        r = client.post(f"/sessions/{sid}/exclude", json={"indices": [1]})
        assert r.status_code == 200 and r.json()["stopped"] is True

        r = client.get(f"/sessions/{sid}/result")
        assert r.status_code == 200
        assert r.json() == {"rejected": [0]}

    def test_unknown_session_404(self):
        client = make_client()
        assert client.get("/sessions/nope/view").status_code == 404

    def test_invalid_exclusion_422(self):
        client = make_client()
        sid = create_session(client, [0.01, 0.5, 0.9])["session_id"]
        assert client.post(f"/sessions/{sid}/exclude", json={"indices": [7]}).status_code == 422
        client.post(f"/sessions/{sid}/exclude", json={"indices": [2]})
        assert client.post(f"/sessions/{sid}/exclude", json={"indices": [2]}).status_code == 422

    def test_exclude_after_stop_409(self):
        client = make_client()
        sid = create_session(client, [0.01])["session_id"]
        assert client.post(f"/sessions/{sid}/exclude", json={"indices": [0]}).status_code == 409

    def test_infeasible_config_422(self):
        client = make_client()
        resp = client.post(
            "/sessions",
            json={"pvalues": [0.1], "config": {"scheme": {"variant": "tent", "p_star": 0.3}, "alpha": 0.2}},
        )
        assert resp.status_code == 422

    def test_adjusted_start_conflicts(self):
        client = make_client()
        sid = create_session(client, [0.01, 0.5, 0.9])["session_id"]
        r = client.post(f"/sessions/{sid}/adjusted-start")
        assert r.status_code in (409, 422)


class TestInformationFlow:
    def test_view_has_no_hidden_bit_field(self):
        client = make_client()
        created = create_session(client, [0.01, 0.5, 0.9])
        text = json.dumps(created["view"])
        assert "hidden" not in text
        sid = created["session_id"]
        client.post(f"/sessions/{sid}/exclude", json={"indices": [2]})
        text = client.get(f"/sessions/{sid}/view").text
        assert "hidden" not in text

    def test_sentinel_bits_leave_no_trace(self):
        scheme = MaskingScheme("tent", p_star=0.2)
        g = 0.0625
        p_minus = invert(MaskedPair(h=-1, g=g), scheme)
        assert mask(p_minus, scheme).g == g
        filler = [0.5, 0.9, 0.7]
        client = make_client()
        sid_plus = create_session(client, [g] + filler)["session_id"]
        sid_minus = create_session(client, [p_minus] + filler)["session_id"]
        v_plus = client.get(f"/sessions/{sid_plus}/view").json()
        v_minus = client.get(f"/sessions/{sid_minus}/view").json()
        assert json.dumps(v_plus, sort_keys=True) == json.dumps(v_minus, sort_keys=True)

    def test_estimate_absent_in_strict_mode(self):
        client = make_client()
        view = create_session(client, [0.01, 0.5, 0.9])["view"]
        assert view["estimate"] is None


class TestAuto:
    def test_auto_advances_journal_at_most_steps(self):
        client = make_client()
        pvals = [0.3 + 0.01 * i for i in range(30)]
        covs = [[float(i % 6), float(i // 6)] for i in range(30)]
        sid = create_session(client, pvals, covariates=covs)["session_id"]
        before = client.get(f"/sessions/{sid}/journal").text.count("\n")
        r = client.post(
            f"/sessions/{sid}/auto",
            json={"strategy": "cone_peel", "params": {"cone_d": 4, "cone_delta": 0.2}, "steps": 3},
        )
        assert r.status_code == 200, r.text
        after = client.get(f"/sessions/{sid}/journal").text.count("\n")
        assert 1 <= after - before <= 3

    def test_auto_runs_to_stop(self):
        client = make_client()
        pvals = [0.01, 0.5, 0.9, 0.6, 0.7]
        sid = create_session(client, pvals)["session_id"]
        r = client.post(
            f"/sessions/{sid}/auto",
            json={"strategy": "lowest_score", "steps": 100},
        )
        assert r.json()["stopped"] is True
        assert client.get(f"/sessions/{sid}/result").status_code == 200

    def test_generator_create(self):
        client = make_client()
        resp = client.post(
            "/sessions",
            json={
                "generator": {"kind": "grid", "rows": 6, "cols": 6, "disc_radius": 0.0, "seed": 3},
                "config": {"scheme": {"variant": "tent", "p_star": 0.1}, "alpha": 0.2},
            },
        )
        assert resp.status_code == 201
        assert len(resp.json()["view"]["hypotheses"]) == 36


class TestMutationSerialization:
    def test_contended_mutation_gets_retry_signal(self):
        client = make_client()
        sid = create_session(client, [0.01, 0.5, 0.9])["session_id"]
        app = client.app
        holder = app.state.sessions[sid]
        assert holder.lock.acquire(blocking=False)
        try:
            r = client.post(f"/sessions/{sid}/exclude", json={"indices": [2]})
            assert r.status_code == 409
            assert r.json()["detail"]["retry"] is True
        finally:
            holder.lock.release()
        # After the contender releases the lock, the mutation goes through.
        assert client.post(f"/sessions/{sid}/exclude", json={"indices": [2]}).status_code == 200


class TestJournalPersistence:
    def test_restart_recovers_sessions(self, tmp_path):
        app = create_app(journal_dir=tmp_path)
        client = TestClient(app)
        created = create_session(client, [0.01, 0.5, 0.9, 0.6, 0.7])
        sid = created["session_id"]
        client.post(f"/sessions/{sid}/exclude", json={"indices": [3]})
        journal_before = client.get(f"/sessions/{sid}/journal").text

        # Fresh app over the same journal directory sees the same session.
        client2 = TestClient(create_app(journal_dir=tmp_path))
        view = client2.get(f"/sessions/{sid}/view")
        assert view.status_code == 200
        assert view.json()["step"] == 1
        assert client2.get(f"/sessions/{sid}/journal").text == journal_before

        r = client2.post(f"/sessions/{sid}/exclude", json={"indices": [1]})
        assert r.status_code == 200

    def test_journal_replay_round_trip_via_module(self, tmp_path):
        from ifwer.session import replay

        app = create_app(journal_dir=tmp_path)
        client = TestClient(app)
        created = create_session(client, [0.01, 0.5, 0.9])
        sid = created["session_id"]
        client.post(f"/sessions/{sid}/exclude", json={"indices": [2]})
        client.post(f"/sessions/{sid}/exclude", json={"indices": [1]})
        journal = client.get(f"/sessions/{sid}/journal").text
        inputs = json.loads((tmp_path / f"{sid}.inputs.json").read_text())
        session = replay(journal, inputs["pvalues"], inputs["covariates"])
        assert session.stopped
        assert session.rejections == frozenset({0})
