import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from geoshap import (
    BackgroundSet,
    BridgeClient,
    BridgeConfig,
    CoalitionSpace,
    Predictor,
    explain_exact,
)
from geoshap.errors import (
    ArityMismatch,
    BridgeTimeout,
    MalformedReply,
    RemoteModelError,
    TransportError,
    VersionMismatch,
)

FIXTURE = str(Path(__file__).parent / "fixtures" / "serve_fixture.py")
GOLDEN_DIR = Path(__file__).parent / "golden"


def stdio_config(*extra, timeout=10.0, max_batch=1024):
    cmd = (sys.executable, FIXTURE) + extra
    return BridgeConfig(transport="stdio", command=cmd, timeout=timeout,
                        max_batch=max_batch)


class TestHandshake:
    def test_descriptor(self):
        with BridgeClient(stdio_config("--model", "sum", "--n-features", "4")) as client:
            desc = client.handshake()
        assert desc.n_features == 4
        assert desc.version == 1
        assert "sum" in desc.name

    def test_version_mismatch(self):
        with BridgeClient(stdio_config("--version", "99")) as client:
            with pytest.raises(VersionMismatch, match="99"):
                client.handshake()

    def test_dead_endpoint(self):
        cfg = BridgeConfig(transport="tcp", host="127.0.0.1", port=9, timeout=2.0)
        with pytest.raises(TransportError):
            BridgeClient(cfg)

    def test_bad_launch_command(self):
        cfg = BridgeConfig(transport="stdio", command=("/nonexistent/bin",), timeout=2.0)
        with pytest.raises(TransportError):
            BridgeClient(cfg)


class TestPredictBatch:
    def test_identity_sum(self):
        with BridgeClient(stdio_config("--model", "sum", "--n-features", "3")) as client:
            y = client.predict_batch(np.array([[1., 2., 3.], [4., 5., 6.], [0., 0., 1.]]))
        np.testing.assert_array_equal(y, [6.0, 15.0, 1.0])

    def test_batch_splitting_preserves_order(self, rng):
        X = rng.normal(size=(250, 3))
        with BridgeClient(stdio_config("--model", "sum", "--n-features", "3",
                                       max_batch=100)) as client:
            y = client.predict_batch(X)
        np.testing.assert_allclose(y, X.sum(axis=1), atol=1e-12)

    def test_wrong_length_reply(self):
        with BridgeClient(stdio_config("--wrong-length")) as client:
            with pytest.raises(MalformedReply, match="expected 2 predictions"):
                client.predict_batch(np.zeros((2, 3)))

    def test_arity_mismatch_checked_client_side(self):
        with BridgeClient(stdio_config("--n-features", "3")) as client:
            with pytest.raises(ArityMismatch):
                client.predict_batch(np.zeros((2, 5)))

    def test_nan_reply_rejected(self):
        with BridgeClient(stdio_config("--reply-nan")) as client:
            with pytest.raises(MalformedReply):
                client.predict_batch(np.zeros((1, 3)))

    def test_nan_request_rejected_before_send(self):
        with BridgeClient(stdio_config()) as client:
            client.handshake()
            with pytest.raises(TransportError, match="non-finite"):
                client.predict_batch(np.array([[np.nan, 0.0, 0.0]]))

    def test_timeout(self):
        with BridgeClient(stdio_config("--sleep", "5", timeout=0.3)) as client:
            with pytest.raises(BridgeTimeout):
                client.handshake()

    def test_garbage_reply(self):
        with BridgeClient(stdio_config("--garbage")) as client:
            with pytest.raises(MalformedReply):
                client.handshake()

    def test_remote_error_reply(self):
        cmd = (sys.executable, FIXTURE, "--n-features", "3")
        cfg = BridgeConfig(transport="stdio", command=cmd, timeout=10.0,
                           check_arity=False)
        with BridgeClient(cfg) as client:
            client.handshake()
            with pytest.raises(RemoteModelError, match="bad row width"):
                client.predict_batch(np.zeros((1, 5)))


class TestTcpTransport:
    def test_roundtrip(self, tmp_path):
        proc = subprocess.Popen(
            [sys.executable, FIXTURE, "--model", "linear:2,3", "--n-features", "2",
             "--transport", "tcp"],
            stderr=subprocess.PIPE, text=True)
        try:
            line = proc.stderr.readline()
            port = int(line.strip().split()[-1])
            cfg = BridgeConfig(transport="tcp", host="127.0.0.1", port=port, timeout=5.0)
            with BridgeClient(cfg) as client:
                desc = client.handshake()
                assert desc.n_features == 2
                y = client.predict_batch(np.array([[1.0, 1.0]]))
            assert y[0] == pytest.approx(5.0, abs=1e-12)
        finally:
            proc.terminate()
            proc.wait(timeout=5)


def _match_golden(expected, actual, path=""):
    if isinstance(expected, str):
        assert expected == "*" or expected == actual, f"{path}: {actual!r}"
        return
    if isinstance(expected, bool) or expected is None:
        assert expected == actual, f"{path}: {actual!r}"
        return
    if isinstance(expected, (int, float)):
        assert actual == pytest.approx(expected, abs=1e-12, rel=1e-12), f"{path}"
        return
    if isinstance(expected, list):
        assert isinstance(actual, list) and len(actual) == len(expected), f"{path}"
        for i, (e, a) in enumerate(zip(expected, actual)):
            _match_golden(e, a, f"{path}[{i}]")
        return
    assert isinstance(actual, dict), f"{path}"
    assert set(actual) == set(expected), f"{path}: keys {set(actual)}"
    for key in expected:
        _match_golden(expected[key], actual[key], f"{path}.{key}")


class TestGoldenFixtures:
    def test_native_server_matches_golden_corpus(self):
        cases = sorted(GOLDEN_DIR.glob("case*.txt"))
        assert cases, "golden corpus missing"
        proc = subprocess.Popen(
            [sys.executable, FIXTURE, "--model", "linear:2,3", "--n-features", "2"],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
        try:
            for case in cases:
                request, expected = case.read_text().splitlines()
                proc.stdin.write(request + "\n")
                proc.stdin.flush()
                reply = proc.stdout.readline().strip()
                _match_golden(json.loads(expected), json.loads(reply), case.stem)
        finally:
            proc.stdin.close()
            proc.wait(timeout=5)


class TestBridgeEquivalence:
    def test_bridge_explanations_match_in_process(self, rng):
        # the round-trip invariant with a native fixture standing in for any
        # external adapter: linear model served over the wire
        p = 4
        beta = np.array([2.0, 3.0, 0.0, 0.0])
        native = Predictor(lambda X: X @ beta, p, name="native")
        cs = CoalitionSpace(p, (2, 3))
        bg = BackgroundSet(rng.normal(size=(8, p)))
        X = rng.normal(size=(5, p))

        cfg = stdio_config("--model", "linear:2,3,0,0", "--n-features", "4")
        with BridgeClient(cfg) as client:
            remote = client.as_predictor()
            assert remote.serial
            for i in range(X.shape[0]):
                a = explain_exact(native, X[i], bg, cs)
                b = explain_exact(remote, X[i], bg, cs)
                np.testing.assert_allclose(b.phi, a.phi, atol=1e-9)
                assert b.phi_geo == pytest.approx(a.phi_geo, abs=1e-9)
                np.testing.assert_allclose(b.phi_geo_x, a.phi_geo_x, atol=1e-9)
                assert b.residual == pytest.approx(a.residual, abs=1e-9)
