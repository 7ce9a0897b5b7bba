"""
Granular-Ball Latent Domain Discovery
Command-line front end: discover, align, eval, bench, synth and losses
"""

import argparse
import json
import sys
from datetime import datetime
from pathlib import Path

import numpy as np

from ball_divider import ballset_to_json, division_report
from benchmark import (DEFAULT_SCALING_NS, STABILITY_CENTER_WEIGHTING, STABILITY_MIN_BALL,
                       run_scaling_bench, run_stability_bench)
from config import RunConfig
from descriptor_io import DescriptorLoader, load_descriptors, save_descriptors
from domain_discovery import (DATASET_K_PRESETS, align_labels, discover_run, load_assignment,
                              resolve_k, save_assignment, suggest_k)
from evaluation import evaluate_assignment, label_churn
from exceptions import ConfigError, DescriptorFormatError, GBDomainError, PreconditionError
from gradient_check import check_gradient
from losses import (CodebookState, loss_den, loss_orth, loss_sem, loss_sty, semantic_descriptors,
                    total_loss)
from report_generator import ReportGenerator
from synthetic import generate_mixture, table4_style_spec, well_separated_spec
from visualizer import Visualizer

DEFAULT_SYNTH_K = 4


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def write_json(path, payload: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


class DomainDiscoveryPipeline:
    """
    Descriptor file -> pseudo-domain labels, with optional figures and PDF report
    """

    def __init__(self, config: RunConfig):
        """
        Args:
            config: validated RunConfig of the discover command
        """
        self.config = config
        self.output_dir = Path(config.out)
        self.output_dir.mkdir(exist_ok=True, parents=True)
        self.loader = DescriptorLoader(fmt=config.format)

        self.descriptors = None
        self.run_result = None
        self.insights = {}

    def _say(self, message: str):
        if not self.config.quiet:
            print(message)

    def run(self) -> dict:
        config = self.config
        self._say("Latent Domain Discovery Starting...")
        self._say("=" * 60)

        self._say("\n Step 1: Loading descriptors...")
        self.descriptors = self.loader.load(config.input)
        self.insights['data_info'] = self.loader.data_info
        self._say(f"[OK] Loaded {self.descriptors.N} descriptors (D={self.descriptors.D})")

        self._say("\n Step 2: Resolving the number of pseudo-domains...")
        K = resolve_k(config.K, config.dataset, self.descriptors.N, config.k_auto)
        k0, candidates = suggest_k(self.descriptors.N)
        self._say(f"[OK] K = {K} (N^(1/4) = {k0:.2f}, candidates {candidates})")

        prev = None
        if config.prev:
            prev, _ = load_assignment(config.prev)
            self._say(f"   Aligning to previous assignment {config.prev} (epoch {prev.epoch})")

        self._say("\n Step 3: Dividing granular balls and clustering representatives...")
        self.run_result = discover_run(
            self.descriptors, K, pca_d=config.pca_d, div_params=config.division_params(),
            rng_seed=config.seed, prev=prev, epoch=0 if prev is None else prev.epoch + 1,
            threads=config.threads, center_weighting=config.center_weighting)
        assignment = self.run_result.assignment
        self.insights['division_report'] = division_report(self.run_result.ballset)
        self.insights['assignment'] = assignment.to_meta()
        self.insights['evaluation'] = evaluate_assignment(assignment, self.descriptors.gt_counts,
                                                          self.descriptors.true_domains)
        self._say(f"[OK] {len(self.run_result.ballset)} balls, source {assignment.source.value}")

        self._say("\n Step 4: Saving assignment...")
        meta = {
            'config': config.to_dict(),
            'num_balls': len(self.run_result.ballset),
            'pca_d': None if self.run_result.pca_model is None else self.run_result.pca_model.d,
            'k_suggestion': {'k0': k0, 'candidates': candidates},
        }
        if not config.no_timestamp:
            meta['timestamp'] = datetime.now().isoformat(timespec="seconds")
        labels_path, meta_path = save_assignment(assignment, self.descriptors.sample_ids,
                                                 self.output_dir, extra_meta=meta)
        outputs = {'labels': str(labels_path), 'meta': str(meta_path)}
        if config.save_balls:
            balls_path = self.output_dir / "balls.json"
            ballset_to_json(self.run_result.ballset, balls_path)
            outputs['balls'] = str(balls_path)
        self._say(f"[OK] Labels saved to {labels_path}")

        if config.report:
            self._say("\n Step 5: Generating figures and PDF report...")
            visualizer = Visualizer(output_dir=str(self.output_dir / "visualizations"))
            visualizer.generate_all_plots(self.run_result.ballset, assignment,
                                          reduced=self.run_result.reduced,
                                          gt_counts=self.descriptors.gt_counts)
            self.insights['config'] = config.to_dict()
            report_path = ReportGenerator(output_dir=str(self.output_dir)).generate_report(
                config.input, self.insights, visualizations_dir=str(visualizer.output_dir),
                timestamp=not config.no_timestamp)
            outputs['report'] = report_path
            self._say(f"[OK] Report saved to {report_path}")

        self._say("\n" + "=" * 60)
        self._say(" Discovery completed!")
        self._say(f" All outputs saved to: {self.output_dir}")
        self._say("=" * 60)
        return outputs


def cmd_discover(config: RunConfig) -> int:
    if config.input is None:
        raise ConfigError("--input is required")
    if config.K is None and config.dataset is None and not config.k_auto:
        raise ConfigError("set --k, --dataset or --k-auto")
    DomainDiscoveryPipeline(config).run()
    return 0


def cmd_align(config: RunConfig) -> int:
    if config.input is None or config.prev is None:
        raise ConfigError("--input and --prev are required")
    current, sample_ids = load_assignment(config.input)
    previous, _ = load_assignment(config.prev)
    aligned = align_labels(current, previous)

    out_dir = Path(config.out)
    save_assignment(aligned, sample_ids, out_dir, extra_meta={'config': config.to_dict()}, prefix="aligned")
    write_json(out_dir / "permutation.json", {'permutation': aligned.permutation_applied.tolist(),
                                              'K': aligned.K})
    if not config.quiet:
        print(f"[OK] Permutation {aligned.permutation_applied.tolist()} written to {out_dir}")
    return 0


def _sidecar_by_id(sample_ids, count_path, fmt):
    dset = load_descriptors(count_path, fmt=fmt)
    row_of = {sid: i for i, sid in enumerate(dset.sample_ids)}
    missing = [sid for sid in sample_ids if sid not in row_of]
    if missing:
        raise PreconditionError(f"sample ids missing from {count_path}: {missing[:5]}", code="length_mismatch")
    rows = [row_of[sid] for sid in sample_ids]
    counts = None if dset.gt_counts is None else dset.gt_counts[rows]
    domains = None if dset.true_domains is None else dset.true_domains[rows]
    return counts, domains


def cmd_eval(config: RunConfig) -> int:
    paths = config.inputs or ([config.input] if config.input else [])
    if not paths:
        raise ConfigError("--input is required")
    loaded = [load_assignment(p) for p in paths]

    results = []
    for path, (assignment, sample_ids) in zip(paths, loaded):
        counts = domains = None
        if config.counts:
            counts, domains = _sidecar_by_id(sample_ids, config.counts, config.format)
        results.append({'path': str(path), **evaluate_assignment(assignment, counts, domains)})

    payload = {'assignments': results, 'config': config.to_dict()}
    if len(loaded) >= 2:
        payload['churn'] = label_churn([a for a, _ in loaded])
    write_json(Path(config.out) / "eval.json", payload)

    if not config.quiet:
        for result in results:
            strat = result['stratification']
            line = f"   {result['path']}: K={result['K']}"
            if strat:
                line += f", delta_med={strat['delta_med']:.2f}, sigma_med={strat['sigma_med']:.2f}"
            if result['ari'] is not None:
                line += f", ARI={result['ari']:.4f}"
            print(line)
        if 'churn' in payload:
            print(f"   churn={payload['churn']:.4f}")
    return 0


def _preset_k(config: RunConfig) -> int:
    """K of the synthetic mixtures: --k, then --dataset, then DEFAULT_SYNTH_K"""
    if config.K is None and config.dataset is None:
        return DEFAULT_SYNTH_K
    return resolve_k(config.K, config.dataset)


def cmd_bench(config: RunConfig) -> int:
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = config.division_params()

    if config.mode == "scaling":
        result = run_scaling_bench(Ns=config.ns or DEFAULT_SCALING_NS, d=config.dim, params=params,
                                   seed=config.seed, repeats=config.repeats, threads=config.threads)
        result.rows.to_csv(out_dir / "scaling.csv", index=False, lineterminator="\n")
        write_json(out_dir / "scaling.json", {'summary': result.summary(), 'config': config.to_dict()})
        if config.report:
            Visualizer(output_dir=str(out_dir / "visualizations")).plot_scaling(result.rows, result.slope)
        if not config.quiet:
            print(f"[OK] log-log slope of division time over N: {result.slope:.3f}")
        return 0

    seeds = range(config.seed, config.seed + config.seeds)
    result = run_stability_bench(seeds=seeds, epochs=config.epochs, K=_preset_k(config),
                                 outlier_fraction=config.outliers, drift_sigma=config.drift,
                                 dim=config.dim, n_per_domain=config.n_per_domain, params=params,
                                 pca_d=config.pca_d, threads=config.threads,
                                 center_weighting=config.center_weighting)
    result.rows.to_csv(out_dir / "stability.csv", index=False, float_format="%.10g", lineterminator="\n")
    write_json(out_dir / "stability.json", {'summary': result.summary, 'config': config.to_dict()})
    if config.report:
        Visualizer(output_dir=str(out_dir / "visualizations")).plot_churn(result.rows)
    if not config.quiet:
        for method, summary in result.summary.items():
            print(f"   {method:12s} churn={summary['median_churn']:.4f} "
                  f"ARI={summary['median_ari']:.4f} delta_med={summary['median_delta_med']:.2f}")
    return 0


def cmd_synth(config: RunConfig) -> int:
    K = _preset_k(config)
    if config.layout == "separated":
        spec = well_separated_spec(K=K, dim=config.dim, n_total=K * config.n_per_domain, seed=config.seed,
                                   outlier_fraction=config.outliers)
    else:
        spec = table4_style_spec(K=K, dim=config.dim, n_per_domain=config.n_per_domain, seed=config.seed,
                                 outlier_fraction=config.outliers, drift_sigma=config.drift)
    dset = generate_mixture(spec)
    out = Path(config.out)
    save_descriptors(dset, out, fmt=config.format)
    write_json(Path(f"{out}.spec.json"), spec.to_dict())
    if not config.quiet:
        print(f"[OK] Wrote {dset.N} descriptors (D={dset.D}, K_true={spec.K_true}) to {out}")
    return 0


def _load_bundle(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Loss input bundle not found: {path}")
    bundle = np.load(path, allow_pickle=False)
    if not hasattr(bundle, "files"):
        raise DescriptorFormatError(f"{path} is not an .npz bundle", code="bad_format")
    with bundle:
        return {name: bundle[name] for name in bundle.files}


def cmd_losses(config: RunConfig) -> int:
    if config.input is None:
        raise ConfigError("--input is required")
    arrays = _load_bundle(config.input)

    if 'p' not in arrays and 'S_batch' in arrays:
        S_batch = arrays['S_batch']
        cb = (CodebookState(arrays['E']) if 'E' in arrays
              else CodebookState.random(S_batch.shape[1], config.codebook_size, config.seed))
        arrays['p'] = semantic_descriptors(S_batch, cb)

    parts, probes = {}, {}
    if 'pred' in arrays and 'gt' in arrays:
        gt = arrays['gt']
        parts['den'] = loss_den(arrays['pred'], gt)
        probes['den'] = (lambda x: _pair(loss_den(x, gt), 'pred'), arrays['pred'])
    if 'labels' in arrays:
        labels = arrays['labels']
        if 'p' in arrays:
            parts['sem'] = loss_sem(arrays['p'], labels)
            probes['sem'] = (lambda x: _pair(loss_sem(x, labels), 'p'), arrays['p'])
        if 't' in arrays:
            parts['sty'] = loss_sty(arrays['t'], labels)
            probes['sty'] = (lambda x: _pair(loss_sty(x, labels), 't'), arrays['t'])
    if 'S_flat' in arrays and 'T_flat' in arrays:
        S_flat = arrays['S_flat']
        parts['orth'] = loss_orth(S_flat, arrays['T_flat'], config.orth_eps)
        probes['orth'] = (lambda x: _pair(loss_orth(S_flat, x, config.orth_eps), 'T_flat'), arrays['T_flat'])
    if not parts:
        raise PreconditionError("no loss inputs found in the bundle")

    report = total_loss(parts, config.loss_weights())
    payload = {'report': report.to_dict(), 'inputs': sorted(arrays), 'config': config.to_dict()}

    failed = []
    if config.check_grads:
        checks = {}
        for name, (fn, x) in sorted(probes.items()):
            result = check_gradient(fn, x)
            checks[name] = {'max_rel_error': result.max_rel_error, 'passed': result.passed}
            if not result.passed:
                failed.append(name)
        payload['gradient_checks'] = checks

    write_json(Path(config.out) / "losses.json", payload)
    if not config.quiet:
        print(f"[OK] total={report.total:.6g} den={report.den:.6g} sem={report.sem:.6g} "
              f"sty={report.sty:.6g} orth={report.orth:.6g}")
    if failed:
        raise PreconditionError(f"gradient check failed for {', '.join(failed)}", code="gradient_check")
    return 0


def _pair(term, key):
    return term.value, term.grads[key]


def _optional_int(raw: str):
    if raw.lower() in ("none", "inf"):
        return None
    return int(raw)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=0, help='Random seed')
    common.add_argument('--threads', type=int, default=None,
                        help='Worker threads (falls back to GBDOMAIN_THREADS, then 1)')
    common.add_argument('--format', choices=['bin', 'csv'], default=None,
                        help='Descriptor file format (default: by extension)')
    common.add_argument('--quiet', action='store_true', help='Suppress progress output')
    common.add_argument('--no-timestamp', action='store_true', help='Keep timestamps out of the outputs')

    division = argparse.ArgumentParser(add_help=False)
    division.add_argument('--tau', type=float, default=1.05, help='Split margin (inf accepts every split)')
    division.add_argument('--beta', type=float, default=2.0, help='Feature-weight sharpness (> 1)')
    division.add_argument('--eps', type=float, default=1e-12, help='Weight-update smoothing constant')
    division.add_argument('--dmax', dest='d_max', type=_optional_int, default=12,
                          help='Depth cap ("none" for uncapped)')
    division.add_argument('--min-ball', dest='min_ball', type=int, default=4, help='Smallest splittable ball')
    division.add_argument('--pca-d', dest='pca_d', type=int, default=None,
                          help='Reduced dimension (default min(32, D, N-1))')

    preset_k = argparse.ArgumentParser(add_help=False)
    preset_k.add_argument('--k', dest='K', type=int, default=None, help='Number of pseudo-domains')
    preset_k.add_argument('--dataset', choices=sorted(DATASET_K_PRESETS), default=None,
                          help='K preset of a source dataset')
    choose_k = argparse.ArgumentParser(add_help=False, parents=[preset_k])
    choose_k.add_argument('--k-auto', dest='k_auto', action='store_true', help='K from round(N ** 0.25)')

    parser = argparse.ArgumentParser(description='Granular-ball latent domain discovery')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True

    discover = subparsers.add_parser('discover', parents=[common, division, choose_k],
                                     help='Discover pseudo-domains of a descriptor file')
    discover.add_argument('--input', required=True, help='Descriptor file (.gbd binary or .csv)')
    discover.add_argument('--out', default='output', help='Output directory')
    discover.add_argument('--prev', default=None, help='Previous labels.csv to align to')
    discover.add_argument('--center-weighting', dest='center_weighting', choices=['uniform', 'size'],
                          default='uniform', help='Ball-center K-means weighting')
    discover.add_argument('--save-balls', dest='save_balls', action='store_true', help='Write balls.json')
    discover.add_argument('--report', action='store_true', help='Write figures and a PDF report')
    discover.set_defaults(handler=cmd_discover)

    align = subparsers.add_parser('align', parents=[common], help='Align labels to a previous epoch')
    align.add_argument('--input', required=True, help='Current labels.csv')
    align.add_argument('--prev', required=True, help='Previous labels.csv')
    align.add_argument('--out', default='output', help='Output directory')
    align.set_defaults(handler=cmd_align)

    evaluate = subparsers.add_parser('eval', parents=[common], help='Stratification, ARI and churn')
    evaluate.add_argument('--input', dest='inputs', nargs='+', required=True,
                          help='One labels.csv per epoch, in epoch order')
    evaluate.add_argument('--counts', default=None, help='Descriptor file carrying counts / true domains')
    evaluate.add_argument('--out', default='output', help='Output directory')
    evaluate.set_defaults(handler=cmd_eval)

    bench = subparsers.add_parser('bench', parents=[common, division, preset_k], help='Benchmark sweeps')
    bench.add_argument('--mode', choices=['scaling', 'stability'], default='scaling')
    bench.add_argument('--ns', type=int, nargs='+', default=None, help='Sizes of the scaling sweep')
    bench.add_argument('--dim', type=int, default=16, help='Descriptor dimension')
    bench.add_argument('--repeats', type=int, default=3, help='Timing repeats per size')
    bench.add_argument('--seeds', type=int, default=20, help='Number of seeds of the stability sweep')
    bench.add_argument('--epochs', type=int, default=10, help='Simulated epochs')
    bench.add_argument('--drift', type=float, default=0.1, help='Per-epoch drift magnitude')
    bench.add_argument('--outliers', type=float, default=0.1, help='Outlier fraction')
    bench.add_argument('--n-per-domain', dest='n_per_domain', type=int, default=100)
    bench.add_argument('--center-weighting', dest='center_weighting', choices=['uniform', 'size'],
                       default=STABILITY_CENTER_WEIGHTING, help='Ball-center weighting of the stability sweep')
    bench.add_argument('--out', default='output', help='Output directory')
    bench.add_argument('--report', action='store_true', help='Write figures')
    bench.set_defaults(handler=cmd_bench, min_ball=STABILITY_MIN_BALL)

    synth = subparsers.add_parser('synth', parents=[common, preset_k], help='Write a synthetic mixture')
    synth.add_argument('--layout', choices=['table4', 'separated'], default='table4')
    synth.add_argument('--dim', type=int, default=16, help='Descriptor dimension')
    synth.add_argument('--n-per-domain', dest='n_per_domain', type=int, default=100)
    synth.add_argument('--outliers', type=float, default=0.0, help='Outlier fraction')
    synth.add_argument('--drift', type=float, default=0.0, help='Drift magnitude recorded in the .spec.json')
    synth.add_argument('--out', default='synth.gbd', help='Descriptor file to write')
    synth.set_defaults(handler=cmd_synth)

    losses = subparsers.add_parser('losses', parents=[common], help='Evaluate the training losses')
    losses.add_argument('--input', required=True, help='.npz bundle (pred, gt, p, t, labels, S_flat, T_flat)')
    losses.add_argument('--out', default='output', help='Output directory')
    losses.add_argument('--lambda-sem', dest='lambda_sem', type=float, default=0.1)
    losses.add_argument('--lambda-sty', dest='lambda_sty', type=float, default=0.1)
    losses.add_argument('--lambda-orth', dest='lambda_orth', type=float, default=0.1)
    losses.add_argument('--orth-eps', dest='orth_eps', type=float, default=1e-8)
    losses.add_argument('--codebook-size', dest='codebook_size', type=int, default=64)
    losses.add_argument('--check-grads', dest='check_grads', action='store_true',
                        help='Finite-difference check of every analytic gradient')
    losses.set_defaults(handler=cmd_losses)
    return parser


def main(argv=None) -> int:
    """
    Entry point; returns the process exit code
    0 ok, 2 bad arguments, 3 I/O or file format, 4 numeric or precondition failure
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    try:
        config = RunConfig.from_args(args).validate()
        return args.handler(config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (OSError, DescriptorFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (GBDomainError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
