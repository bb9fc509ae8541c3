import time

import numpy as np
import orjson
import pandas as pd
import pytest

from config.settings import settings
from main import main
from src.core.errors import CheckFailure
from src.core.report import Report, ReportBundle
from src.core.runner import RunConfig, VerificationRunner, random_lift_fixture
from src.families.constructions import centered_axis
from src.invariants.classifier import BINORMAL_LIFT, DEGENERATE, FIBER_CP2, ABData, ab_to_dict


def read_bundle(path):
    return orjson.loads(path.read_bytes())


def report_named(bundle, name):
    return next(r for r in bundle['reports'] if r['name'] == name)


def write_ab(path, A, B):
    path.write_bytes(orjson.dumps(ab_to_dict(ABData(A=A, B=B, step=(1e-2, 1e-2)))))


@pytest.fixture
def binormal_json(tmp_path):
    x = centered_axis(9, 1e-2)
    z = x[:, None] + 1j * x[None, :]
    zero = np.zeros_like(z)
    path = tmp_path / 'binormal_ab.json'
    write_ab(path, np.stack([1.0 + 0.5 * z, zero], axis=-1), np.stack([zero, 0.5 * np.exp(z)], axis=-1))
    return path


@pytest.fixture
def random_json(tmp_path):
    path = tmp_path / 'random_lift.json'
    random_lift_fixture(str(path), seed=3)
    return path


class TestVerify:
    def test_harvey_lawson_passes(self, tmp_path):
        out = tmp_path / 'hl.json'
        assert main(['verify', '--family', 'hl', '--k', '1', '--out', str(out)]) == 0
        bundle = read_bundle(out)
        assert bundle['summary']['passed']
        assert {r['name'] for r in bundle['reports']} >= {'hl_implicit:outer', 'hl_implicit:inner'}

    def test_harvey_lawson_rejects_k_zero(self, tmp_path):
        assert main(['verify', '--family', 'hl', '--k', '0', '--out', str(tmp_path / 'x.json')]) == 2

    def test_cone_passes(self, tmp_path):
        out = tmp_path / 'cone.json'
        assert main(['verify', '--family', 'bundle', '--k', '0', '--out', str(out)]) == 0
        assert report_named(read_bundle(out), 'cone_relation')['passed']

    def test_fiber_passes(self, tmp_path):
        out = tmp_path / 'fiber.json'
        assert main(['verify', '--family', 'fiber', '--out', str(out)]) == 0
        assert report_named(read_bundle(out), 'fiber_projection')['max_residual'] < 1e-10

    def test_random_input_fails_checks(self, tmp_path, random_json):
        out = tmp_path / 'random.json'
        assert main(['verify', '--input', str(random_json), '--out', str(out)]) == 1
        assert not read_bundle(out)['summary']['passed']

    def test_csv_samples(self, tmp_path):
        out = tmp_path / 'samples.csv'
        main(['verify', '--family', 't-plane', '--format', 'csv', '--out', str(out)])
        df = pd.read_csv(out)
        assert 'residual' in df.columns
        assert (tmp_path / 'samples.json').exists()

    def test_tolerance_override(self, tmp_path):
        out = tmp_path / 'tight.json'
        main(['verify', '--family', 'fiber', '--tol', '1e-30', '--out', str(out)])
        tolerances = {r['tolerance'] for r in read_bundle(out)['reports'] if r['name'].startswith('coassociative')}
        assert tolerances == {1e-30}


class TestInvariants:
    def test_binormal_data(self, tmp_path, binormal_json):
        out = tmp_path / 'inv.json'
        assert main(['invariants', '--input', str(binormal_json), '--out', str(out)]) == 0
        assert report_named(read_bundle(out), 'classification')['details']['classification'] == BINORMAL_LIFT

    def test_degenerate_data(self, tmp_path):
        path = tmp_path / 'degenerate_ab.json'
        zeros = np.zeros((9, 9, 2), dtype=complex)
        write_ab(path, zeros, zeros)
        out = tmp_path / 'inv.json'
        assert main(['invariants', '--input', str(path), '--out', str(out)]) == 0
        assert report_named(read_bundle(out), 'classification')['details']['classification'] == DEGENERATE

    def test_fiber_family(self, tmp_path):
        out = tmp_path / 'inv.json'
        assert main(['invariants', '--family', 'fiber', '--out', str(out)]) == 0
        assert report_named(read_bundle(out), 'classification')['details']['classification'] == FIBER_CP2

    def test_random_lift_is_not_cr(self, tmp_path, random_json):
        assert main(['invariants', '--input', str(random_json), '--out', str(tmp_path / 'x.json')]) == 3

    def test_missing_input(self, tmp_path):
        assert main(['invariants', '--input', str(tmp_path / 'missing.json')]) == 2

    def test_t_plane_is_not_tabulated(self, tmp_path):
        assert main(['invariants', '--family', 't-plane', '--out', str(tmp_path / 'x.json')]) == 2


class TestProfile:
    def test_csv_is_accurate_and_reproducible(self, tmp_path):
        a, b = tmp_path / 'a.csv', tmp_path / 'b.csv'
        assert main(['profile', '--k', '1', '--grid', '500', '--format', 'csv', '--out', str(a)]) == 0
        assert main(['profile', '--k', '1', '--grid', '500', '--format', 'csv', '--out', str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        df = pd.read_csv(a)
        assert len(df) == 1000
        assert df['residual'].abs().max() < 1e-10

    def test_restricted_range(self, tmp_path):
        out = tmp_path / 'outer.csv'
        assert main(['profile', '--k', '2', '--t-range', '1.5:3', '--format', 'csv', '--out', str(out)]) == 0
        df = pd.read_csv(out)
        assert set(df['branch']) == {'outer'}
        assert df['t'].min() == pytest.approx(1.5)

    def test_k_zero_writes_asymptotes(self, tmp_path):
        out = tmp_path / 'k0.csv'
        assert main(['profile', '--k', '0', '--format', 'csv', '--out', str(out)]) == 0
        assert set(pd.read_csv(out)['branch']) == {'asymptote+', 'asymptote-'}

    def test_svg(self, tmp_path):
        out = tmp_path / 'profile.svg'
        assert main(['profile', '--k', '1', '--format', 'svg', '--out', str(out)]) == 0
        assert '<svg' in out.read_text()


class TestArguments:
    @pytest.mark.parametrize("argv", [
        ['verify', '--family', 'hl', '--tol', '-1'],
        ['verify', '--family', 'hl', '--fd-step', '0'],
        ['verify', '--family', 'bundle', '--grid', '3'],
        ['verify', '--family', 'bundle', '--grid', '5,5,5'],
        ['verify'],
        ['invariants'],
        ['profile', '--t-range', '1:2'],
        ['profile', '--t-range', '2:1'],
        ['profile', '--k', '-1'],
    ])
    def test_invalid_arguments(self, argv):
        assert main(argv) == 2

    def test_config_defaults(self):
        config = RunConfig(command='profile')
        assert config.k == 1.0
        assert config.format == 'json'


class TestReports:
    def test_bundle_times_each_check(self):
        bundle = ReportBundle('verify')
        time.sleep(0.01)
        first = bundle.add(Report(name='slow', max_residual=0.0, tolerance=1.0))
        timed = bundle.add(Report(name='timed', max_residual=0.0, tolerance=1.0, duration=2.5))
        assert first.duration >= 0.01
        assert timed.duration == 2.5
        assert bundle.to_dict()['reports'][0]['duration'] >= 0.01

    def test_verify_records_durations(self, tmp_path):
        out = tmp_path / 'hl.json'
        assert main(['verify', '--family', 'hl', '--k', '1', '--out', str(out)]) == 0
        durations = [r['duration'] for r in read_bundle(out)['reports']]
        assert all(d >= 0.0 for d in durations)
        assert sum(durations) > 0.0

    def test_failed_checks_raise_check_failure(self, tmp_path, random_json):
        out = tmp_path / 'random.json'
        runner = VerificationRunner(RunConfig(command='verify', input=str(random_json), out=str(out)))
        with pytest.raises(CheckFailure) as info:
            runner.run()
        assert info.value.exit_code == 1
        assert out.exists()


def test_metrics_textfile(tmp_path, monkeypatch):
    path = tmp_path / 'metrics.prom'
    monkeypatch.setattr(settings.runtime, 'metrics_path', str(path))
    assert main(['profile', '--k', '1', '--out', str(tmp_path / 'p.csv')]) == 0
    text = path.read_text()
    assert 'calib7_run_seconds' in text
