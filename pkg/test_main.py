"""
Command-line tests: happy paths, exit codes and reproducibility
"""

import json

import numpy as np
import pandas as pd
import pytest

from config import RunConfig
from main import build_parser, main


@pytest.fixture
def synth_file(tmp_path):
    path = tmp_path / "synth.gbd"
    code = main(['synth', '--layout', 'separated', '--k', '3', '--dim', '6', '--n-per-domain', '40',
                 '--out', str(path), '--quiet'])
    assert code == 0
    return path


def _discover(synth_file, out, *extra):
    return main(['discover', '--input', str(synth_file), '--out', str(out), '--quiet', '--no-timestamp',
                 *extra])


def test_synth_writes_descriptors_and_spec(synth_file):
    assert synth_file.exists()
    spec = json.loads(synth_file.with_name("synth.gbd.spec.json").read_text())
    assert len(spec['domains']) == 3


def test_discover_writes_labels_and_meta(tmp_path, synth_file):
    out = tmp_path / "run"
    assert _discover(synth_file, out, '--k', '3', '--save-balls') == 0
    labels = pd.read_csv(out / "labels.csv")
    assert list(labels.columns) == ['sample_id', 'label', 'ball_id']
    assert len(labels) == 120
    meta = json.loads((out / "meta.json").read_text())
    assert meta['K'] == 3 and meta['source'] == "GB_REPRESENTATIVE"
    assert 'timestamp' not in meta
    assert (out / "balls.json").exists()


def test_discover_with_dataset_preset(tmp_path, synth_file):
    assert _discover(synth_file, tmp_path / "run", '--dataset', 'SHB') == 0
    assert json.loads((tmp_path / "run" / "meta.json").read_text())['K'] == 3


def test_labels_do_not_depend_on_threads(tmp_path, synth_file):
    assert _discover(synth_file, tmp_path / "one", '--k', '3', '--threads', '1') == 0
    assert _discover(synth_file, tmp_path / "four", '--k', '3', '--threads', '4') == 0
    assert (tmp_path / "one" / "labels.csv").read_bytes() == (tmp_path / "four" / "labels.csv").read_bytes()
    metas = [json.loads((tmp_path / run / "meta.json").read_text()) for run in ("one", "four")]
    for meta in metas:
        meta['config'].pop('out')
    assert metas[0] == metas[1]


def test_missing_input_file(tmp_path, capsys):
    assert _discover(tmp_path / "absent.gbd", tmp_path / "run", '--k', '3') == 3
    assert capsys.readouterr().err.startswith("error:")


def test_invalid_k(tmp_path, synth_file):
    assert _discover(synth_file, tmp_path / "run", '--k', '0') == 2


def test_k_must_be_chosen(tmp_path, synth_file):
    assert _discover(synth_file, tmp_path / "run") == 2


def test_too_many_domains(tmp_path, synth_file):
    assert _discover(synth_file, tmp_path / "run", '--k', '500') == 4


def test_unknown_command_and_missing_command():
    assert main([]) == 2
    assert main(['divide']) == 2


def test_align_recovers_a_relabelling(tmp_path, synth_file):
    run = tmp_path / "run"
    assert _discover(synth_file, run, '--k', '3') == 0
    original = pd.read_csv(run / "labels.csv")
    swapped = original.copy()
    swapped['label'] = np.array([1, 2, 0])[original['label']]
    swapped.to_csv(tmp_path / "swapped.csv", index=False)

    out = tmp_path / "aligned"
    assert main(['align', '--input', str(tmp_path / "swapped.csv"), '--prev', str(run / "labels.csv"),
                 '--out', str(out), '--quiet']) == 0
    aligned = pd.read_csv(out / "aligned.csv")
    assert aligned['label'].tolist() == original['label'].tolist()
    assert json.loads((out / "permutation.json").read_text())['permutation'] == [2, 0, 1]


def test_align_rejects_changed_cluster_count(tmp_path, synth_file, capsys):
    run = tmp_path / "run"
    assert _discover(synth_file, run, '--k', '3') == 0
    other = pd.read_csv(run / "labels.csv")
    other['label'] = np.arange(len(other)) % 4
    other.to_csv(tmp_path / "four.csv", index=False)
    code = main(['align', '--input', str(tmp_path / "four.csv"), '--prev', str(run / "labels.csv"),
                 '--out', str(tmp_path / "aligned"), '--quiet'])
    assert code == 4
    assert "cluster count changed" in capsys.readouterr().err


def test_align_rejects_length_mismatch(tmp_path, synth_file):
    run = tmp_path / "run"
    assert _discover(synth_file, run, '--k', '3') == 0
    pd.read_csv(run / "labels.csv").head(10).to_csv(tmp_path / "short.csv", index=False)
    code = main(['align', '--input', str(tmp_path / "short.csv"), '--prev', str(run / "labels.csv"),
                 '--out', str(tmp_path / "aligned"), '--quiet'])
    assert code == 4


def test_align_rejects_label_file_without_label_column(tmp_path, synth_file):
    run = tmp_path / "run"
    assert _discover(synth_file, run, '--k', '3') == 0
    pd.read_csv(run / "labels.csv").drop(columns=['label']).to_csv(tmp_path / "nolabel.csv", index=False)
    code = main(['align', '--input', str(tmp_path / "nolabel.csv"), '--prev', str(run / "labels.csv"),
                 '--out', str(tmp_path / "aligned"), '--quiet'])
    assert code == 3


def test_synth_takes_k_from_dataset_preset(tmp_path):
    path = tmp_path / "qnrf.gbd"
    assert main(['synth', '--layout', 'separated', '--dataset', 'QNRF', '--dim', '6',
                 '--n-per-domain', '10', '--out', str(path), '--quiet']) == 0
    spec = json.loads(path.with_name("qnrf.gbd.spec.json").read_text())
    assert len(spec['domains']) == 6


def test_synth_and_bench_do_not_accept_k_auto(tmp_path):
    assert main(['synth', '--k-auto', '--out', str(tmp_path / "s.gbd"), '--quiet']) == 2
    assert main(['bench', '--mode', 'stability', '--k-auto', '--quiet']) == 2


def test_eval_single_domain_has_no_spread(tmp_path, synth_file):
    run = tmp_path / "run"
    assert _discover(synth_file, run, '--k', '1') == 0
    out = tmp_path / "eval"
    assert main(['eval', '--input', str(run / "labels.csv"), '--counts', str(synth_file),
                 '--out', str(out), '--quiet']) == 0
    result = json.loads((out / "eval.json").read_text())['assignments'][0]
    assert result['stratification']['delta_med'] == 0.0
    assert result['stratification']['sigma_med'] == 0.0


def test_eval_churn_over_epochs(tmp_path, synth_file):
    first, second = tmp_path / "e0", tmp_path / "e1"
    assert _discover(synth_file, first, '--k', '3') == 0
    assert _discover(synth_file, second, '--k', '3', '--prev', str(first / "labels.csv")) == 0
    out = tmp_path / "eval"
    assert main(['eval', '--input', str(first / "labels.csv"), str(second / "labels.csv"),
                 '--counts', str(synth_file), '--out', str(out), '--quiet']) == 0
    payload = json.loads((out / "eval.json").read_text())
    assert payload['churn'] == 0.0
    assert payload['assignments'][0]['ari'] >= 0.95


def test_eval_rejects_unaligned_epochs(tmp_path, synth_file):
    first, second = tmp_path / "e0", tmp_path / "e1"
    assert _discover(synth_file, first, '--k', '3') == 0
    assert _discover(synth_file, second, '--k', '3') == 0
    assert main(['eval', '--input', str(first / "labels.csv"), str(second / "labels.csv"),
                 '--out', str(tmp_path / "eval"), '--quiet']) == 4


def test_losses_with_gradient_checks(tmp_path):
    rng = np.random.default_rng(0)
    bundle = tmp_path / "batch.npz"
    pred = rng.random((2, 4, 4))
    np.savez(bundle, pred=pred, gt=pred, p=rng.normal(size=(4, 3)), t=rng.normal(size=(4, 3)),
             labels=np.array([0, 1, 0, 1]), S_flat=rng.normal(size=(3, 5)), T_flat=rng.normal(size=(3, 5)))
    out = tmp_path / "losses"
    assert main(['losses', '--input', str(bundle), '--out', str(out), '--check-grads', '--quiet']) == 0
    payload = json.loads((out / "losses.json").read_text())
    assert payload['report']['den'] == 0.0
    assert all(check['passed'] for check in payload['gradient_checks'].values())


def test_losses_rejects_non_bundle(tmp_path):
    path = tmp_path / "batch.npz"
    np.save(path, np.zeros(3))
    code = main(['losses', '--input', str(tmp_path / "batch.npz.npy"), '--out', str(tmp_path), '--quiet'])
    assert code == 3


def test_scaling_bench_smoke(tmp_path):
    out = tmp_path / "bench"
    assert main(['bench', '--mode', 'scaling', '--ns', '100', '200', '--repeats', '1', '--dim', '4',
                 '--out', str(out), '--quiet']) == 0
    summary = json.loads((out / "scaling.json").read_text())['summary']
    assert summary['Ns'] == [100, 200]
    assert np.isfinite(summary['slope'])


def test_threads_fall_back_to_environment(monkeypatch):
    monkeypatch.setenv("GBDOMAIN_THREADS", "3")
    args = build_parser().parse_args(['discover', '--input', 'x.gbd', '--k', '2'])
    config = RunConfig.from_args(args)
    assert config.threads == 3
    assert 'threads' not in config.to_dict()


def test_bad_thread_environment(monkeypatch, tmp_path, synth_file):
    monkeypatch.setenv("GBDOMAIN_THREADS", "many")
    assert _discover(synth_file, tmp_path / "run", '--k', '3') == 2


def test_discover_report(tmp_path, synth_file):
    out = tmp_path / "run"
    assert _discover(synth_file, out, '--k', '3', '--report') == 0
    assert (out / "discovery_report.pdf").exists()
    figures = sorted(p.name for p in (out / "visualizations").glob("*.png"))
    assert "01_ball_sizes.png" in figures and "04_domain_counts.png" in figures
