"""beam-qtl command line: generate data, train, transfer, evaluate and sweep.

    python src/main.py --seed 7 gen --n-source 3000 --n-target 1000
    python src/main.py train --data outputs/dataset.csv --model qnn --qubits 10 --layers 1
    python src/main.py transfer --data outputs/dataset.csv --model outputs/model.json --samples 104
    python src/main.py make-figures

Exit codes: 0 success, 1 failure (error.json in the output directory and the same
document on stderr), 2 usage error.
"""
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional
import argparse
import json
import logging
import sys

import numpy as np

from analysis.curves import accuracy_vs_samples_curve
from analysis.evaluator import evaluate
from config import Config
from data_collection.csv_io import load_csv, write_csv
from data_collection.dataset import Domain
from data_collection.splits import split_labeled
from data_collection.synthetic import generate_synthetic
from models.checkpoint import load_checkpoint, save_checkpoint
from report.report_generator import (
    write_curve, write_eval_tables, write_json, write_markdown_summary, write_run_metadata,
)
from training.trainer import (
    FreezePolicy, ModelKind, TrainConfig, TransferConfig, TransferExperiment,
    model_factory, run_repeated, train_model, transfer_curve,
)
from utils.errors import BeamQtlError, ConfigurationError
from utils.logger import setup_logger

logger = logging.getLogger('beam_qtl.main')

EXIT_OK = 0
EXIT_FAILURE = 1


@dataclass
class ExperimentSpec:
    """Everything one invocation does, as recorded in metadata.json"""
    command: str
    seed: int
    out_dir: str
    data: Optional[str] = None
    synthetic: Optional[dict] = None
    model_kind: Optional[str] = None
    train: Optional[dict] = None
    transfer: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args, train_config=None, transfer_config=None, **extra):
        synthetic = None
        if getattr(args, 'data', None) is None and hasattr(args, 'n_source'):
            synthetic = {'n_source': args.n_source, 'n_target': args.n_target, 'shift_scale': args.shift}
        return cls(
            command=args.command,
            seed=args.seed,
            out_dir=str(args.out),
            data=getattr(args, 'data', None),
            synthetic=synthetic,
            model_kind=train_config.model_kind.value if train_config else None,
            train=_config_document(train_config),
            transfer=_config_document(transfer_config),
            extra=extra,
        )


def _config_document(config):
    if config is None:
        return None
    doc = asdict(config)
    for key, value in doc.items():
        if isinstance(value, (ModelKind, FreezePolicy)):
            doc[key] = value.value
        elif isinstance(value, frozenset):
            doc[key] = sorted(value)
    return doc


def parse_grid(text):
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated integers, got {text!r}")


def _workers(args):
    return 1 if args.deterministic else Config.WORKERS


def _load_dataset(args):
    if args.data:
        return load_csv(args.data)
    shift = Config.default_shift(scale=args.shift, seed=args.seed)
    return generate_synthetic(args.n_source, args.n_target, shift)


def _train_config(args):
    return TrainConfig(
        model_kind=ModelKind(args.model),
        batch_size=args.batch_size,
        epochs=args.epochs,
        lr=args.lr,
        weight_decay=args.weight_decay,
        seed=args.seed,
        n_qubits=args.qubits,
        n_layers=args.layers,
        knn_k=args.knn_k,
        workers=_workers(args),
    )


def _transfer_config(args):
    return TransferConfig(
        n_samples=args.samples,
        fraction=args.fraction,
        epochs=args.epochs,
        freeze=FreezePolicy(args.freeze),
        batch_size=args.batch_size,
        lr=args.lr,
        weight_decay=args.weight_decay,
        seed=args.seed,
        resample=not args.reshuffle,
        workers=_workers(args),
    )


def _finish(args, summary, spec, dataset=None, metrics=None, title=None):
    out = Path(args.out)
    write_json(summary, out / 'summary.json')
    write_markdown_summary(summary, out, title=title or f"beam-qtl {args.command}")
    write_run_metadata(
        out, args.command, asdict(spec), {'seed': args.seed},
        dataset_hash=dataset.content_hash() if dataset is not None else None,
        metrics=metrics,
    )


# -- subcommands -----------------------------------------------------------------


def cmd_gen(args):
    shift = Config.default_shift(scale=args.shift, seed=args.seed)
    dataset = generate_synthetic(args.n_source, args.n_target, shift)
    path = Path(args.output) if args.output else Path(args.out) / 'dataset.csv'
    write_csv(dataset, path)
    table = dataset.counts_table()
    print(table.to_string())
    spec = ExperimentSpec.from_args(args, shift=asdict(shift), path=str(path))
    write_run_metadata(args.out, 'gen', asdict(spec), {'seed': args.seed},
                       dataset_hash=dataset.content_hash(),
                       metrics={'counts': table.to_dict()})
    return EXIT_OK


def cmd_train(args):
    dataset = _load_dataset(args)
    config = _train_config(args)
    source = dataset.domain(Domain.SOURCE)
    if args.labeled is None or args.labeled >= len(source):
        labeled, held_out = source, None
    else:
        split = split_labeled(dataset, Domain.SOURCE, count=args.labeled, seed=args.seed)
        labeled, held_out = split.labeled, split.evaluation

    trace_set = held_out
    if held_out is not None and args.eval_limit is not None and len(held_out) > args.eval_limit:
        trace_set = held_out.subset(np.arange(args.eval_limit))
    result = train_model(labeled, config, eval_set=trace_set)
    model = result.model
    save_checkpoint(model, Path(args.out) / 'model.json')
    write_curve(result.trace_frame(), args.out, 'trace')

    target = dataset.domain(Domain.TARGET)
    source_report = evaluate(model, held_out) if held_out is not None and len(held_out) else None
    target_report = evaluate(model, target) if len(target) else None
    summary = {
        'command': 'train',
        'model_kind': config.model_kind.value,
        'parameters': model.parameter_counts(),
        'n_labeled': len(labeled),
        'steps': result.steps,
        'train_accuracy': result.trace[-1].train_accuracy if result.trace else None,
        'source_accuracy': source_report.accuracy if source_report else None,
        'target_accuracy': target_report.accuracy if target_report else None,
    }
    if target_report is not None:
        write_eval_tables(target_report, Path(args.out) / 'target', extra={'domain': 'target'})
        summary['evaluation'] = target_report.to_summary()
    _finish(args, summary, ExperimentSpec.from_args(args, config), dataset,
            metrics={k: summary[k] for k in ('train_accuracy', 'source_accuracy', 'target_accuracy')})
    logger.info(f"Trained {config.model_kind.value}: {summary['parameters']}, "
                f"target accuracy {summary['target_accuracy']}")
    return EXIT_OK


def cmd_transfer(args):
    dataset = _load_dataset(args)
    pretrained = load_checkpoint(args.model)
    tconfig = _transfer_config(args)
    repeated = run_repeated(TransferExperiment(pretrained, dataset, tconfig), args.repeats)

    out = Path(args.out)
    repeated.runs.to_csv(out / 'runs.csv', index=False, lineterminator='\n')
    save_checkpoint(repeated.models[0], out / 'model.json')
    write_eval_tables(repeated.reports[0], out / 'repeat_0', extra={'domain': 'target', 'repeat': 0})
    summary = {
        'command': 'transfer',
        'model_kind': pretrained.kind,
        'parameters': pretrained.parameter_counts(),
        'n_transfer': int(repeated.runs['n_transfer'].iloc[0]),
        'repeats': {'n': args.repeats, 'mean': repeated.mean, 'std': repeated.std},
        'evaluation': repeated.reports[0].to_summary(),
    }
    _finish(args, summary, ExperimentSpec.from_args(args, transfer_config=tconfig, checkpoint=str(args.model)),
            dataset, metrics={'mean': repeated.mean, 'std': repeated.std})
    logger.info(f"Transfer over {args.repeats} repeats: accuracy {repeated.mean['accuracy']:.4f} "
                f"+/- {repeated.std['accuracy']:.4f} (before {repeated.mean['pre_accuracy']:.4f})")
    return EXIT_OK


def cmd_eval(args):
    dataset = _load_dataset(args)
    model = load_checkpoint(args.model)
    samples = dataset.domain(Domain.parse(args.domain))
    report = evaluate(model, samples)
    extra = {'command': 'eval', 'model_kind': model.kind, 'parameters': model.parameter_counts(),
             'domain': args.domain}
    write_eval_tables(report, args.out, extra=extra)
    summary = {**extra, 'evaluation': report.to_summary()}
    write_markdown_summary(summary, args.out, title='beam-qtl eval')
    write_run_metadata(args.out, 'eval', asdict(ExperimentSpec.from_args(args, checkpoint=str(args.model))),
                       {'seed': args.seed}, dataset_hash=dataset.content_hash(),
                       metrics=report.to_summary())
    return EXIT_OK


def cmd_curve(args):
    dataset = _load_dataset(args)
    config = _train_config(args)
    table = accuracy_vs_samples_curve(model_factory(config), dataset, args.grid, seed=args.seed,
                                      n_repeats=args.repeats, eval_limit=args.eval_limit)
    write_curve(table, args.out, 'curve')
    summary = {'command': 'curve', 'model_kind': config.model_kind.value, 'curve': table.to_dict('records')}
    _finish(args, summary, ExperimentSpec.from_args(args, config, grid=args.grid), dataset,
            metrics={'final_mean_acc': float(table['mean_acc'].iloc[-1])})
    return EXIT_OK


def cmd_transfer_curve(args):
    dataset = _load_dataset(args)
    pretrained = load_checkpoint(args.model)
    tconfig = _transfer_config(args)
    table = transfer_curve(pretrained, dataset, args.grid, tconfig, n_repeats=args.repeats)
    write_curve(table, args.out, 'transfer_curve')
    summary = {'command': 'transfer-curve', 'model_kind': pretrained.kind, 'curve': table.to_dict('records')}
    _finish(args, summary,
            ExperimentSpec.from_args(args, transfer_config=tconfig, grid=args.grid, checkpoint=str(args.model)),
            dataset, metrics={'final_mean_acc': float(table['mean_acc'].iloc[-1])})
    return EXIT_OK


def cmd_make_figures(args):
    """gen -> train -> transfer -> eval -> curve for every model kind, one directory per step"""
    out = Path(args.out)
    data = str(out / 'dataset.csv')
    common = ['--seed', str(args.seed), '--log-level', args.log_level]
    if args.deterministic:
        common.append('--deterministic')

    def step(sub_out, *argv):
        sub_args = build_parser().parse_args([*common, '--out', str(out / sub_out), *argv])
        return run_command(sub_args)

    step('.', 'gen', '--n-source', str(args.n_source), '--n-target', str(args.n_target),
         '--shift', str(args.shift), '--output', data)
    grid = ','.join(str(n) for n in args.grid)
    for kind in args.models:
        step(f"{kind}/train", 'train', '--data', data, '--model', kind, '--labeled', str(args.labeled),
             '--epochs', str(args.epochs))
        checkpoint = str(out / kind / 'train' / 'model.json')
        step(f"{kind}/eval_source", 'eval', '--data', data, '--model', checkpoint, '--domain', 'source')
        step(f"{kind}/eval_target", 'eval', '--data', data, '--model', checkpoint, '--domain', 'target')
        step(f"{kind}/curve", 'curve', '--data', data, '--model', kind, '--grid', grid,
             '--epochs', str(args.epochs), '--repeats', '1')
        if not ModelKind(kind).is_baseline:
            step(f"{kind}/transfer", 'transfer', '--data', data, '--model', checkpoint,
                 '--fraction', str(Config.TARGET_LABELED_FRACTION), '--epochs', str(args.finetune_epochs),
                 '--repeats', str(args.repeats))
    logger.info(f"All figure tables written under {out}")
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------


def _add_data_args(p):
    p.add_argument('--data', help='dataset CSV; a synthetic dataset is generated when omitted')
    p.add_argument('--n-source', type=int, default=3000, help='synthetic source samples (default 3000)')
    p.add_argument('--n-target', type=int, default=1000, help='synthetic target samples (default 1000)')
    p.add_argument('--shift', type=float, default=1.0,
                   help='scale of the source->target shift; 0 gives no shift (default 1.0)')


def _add_optimizer_args(p, epochs):
    p.add_argument('--epochs', type=int, default=epochs, help=f'training epochs (default {epochs})')
    p.add_argument('--batch-size', type=int, default=Config.BATCH_SIZE, help='mini-batch size')
    p.add_argument('--lr', type=float, default=Config.LEARNING_RATE, help='AdamW learning rate')
    p.add_argument('--weight-decay', type=float, default=Config.WEIGHT_DECAY, help='AdamW decoupled weight decay')


def _add_model_args(p):
    p.add_argument('--model', choices=[k.value for k in ModelKind], default='qnn', help='model kind')
    p.add_argument('--qubits', type=int, default=Config.N_QUBITS, help='QNN qubits')
    p.add_argument('--layers', type=int, default=Config.N_LAYERS, help='QNN ansatz layers')
    p.add_argument('--knn-k', type=int, default=Config.KNN_K, help='kNN neighbours')
    _add_optimizer_args(p, Config.EPOCHS)


def _add_transfer_args(p):
    p.add_argument('--model', required=True, help='pretrained checkpoint (model.json)')
    size = p.add_mutually_exclusive_group()
    size.add_argument('--samples', type=int, help='labeled target samples for fine-tuning')
    size.add_argument('--fraction', type=float, default=Config.TARGET_LABELED_FRACTION,
                      help='labeled target fraction when --samples is not given')
    p.add_argument('--repeats', type=int, default=Config.N_REPEATS, help='fine-tuning repeats')
    p.add_argument('--reshuffle', action='store_true',
                   help='keep one few-shot subset and only reshuffle between repeats')
    p.add_argument('--freeze', choices=[f.value for f in FreezePolicy], default=FreezePolicy.IO_LAYERS.value,
                   help='layers kept fixed while fine-tuning')
    _add_optimizer_args(p, Config.FINETUNE_EPOCHS)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='beam-qtl',
        description='Quantum transfer learning for Wi-Fi beam SNR pose recognition',
    )
    parser.add_argument('--seed', type=int, default=0, help='single seed all randomness derives from')
    parser.add_argument('--deterministic', action='store_true',
                        help='single-threaded gradients for bit-identical reruns')
    parser.add_argument('--out', default=Config.OUTPUT_DIR, help='output directory (env BEAM_QTL_OUTPUT_DIR)')
    parser.add_argument('--log-level', default=Config.LOG_LEVEL,
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], type=str.upper, help='console log level')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen', help='generate a synthetic beam SNR dataset CSV')
    p.add_argument('--n-source', type=int, default=3000, help='source-domain samples (default 3000)')
    p.add_argument('--n-target', type=int, default=1000, help='target-domain samples (default 1000)')
    p.add_argument('--shift', type=float, default=1.0, help='scale of the default domain shift')
    p.add_argument('--output', help='CSV path (default <out>/dataset.csv)')
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser('train', help='train a model on labeled source-domain data')
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument('--labeled', type=int, help='labeled source samples (default: the whole source domain)')
    p.add_argument('--eval-limit', type=int,
                   help='cap on held-out source samples scored after every epoch for trace.csv')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('transfer', help='fine-tune a pretrained checkpoint on few-shot target labels')
    _add_data_args(p)
    _add_transfer_args(p)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser('eval', help='evaluate a checkpoint on one domain')
    _add_data_args(p)
    p.add_argument('--model', required=True, help='checkpoint (model.json)')
    p.add_argument('--domain', choices=[d.value for d in Domain], default=Domain.TARGET.value,
                   help='domain to score (default target)')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('curve', help='target accuracy vs number of labeled source samples')
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument('--grid', type=parse_grid, required=True, help='comma-separated sample counts')
    p.add_argument('--repeats', type=int, default=1, help='models trained per grid point')
    p.add_argument('--eval-limit', type=int, help='cap on evaluation samples per domain')
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser('transfer-curve', help='target accuracy vs number of transfer samples')
    _add_data_args(p)
    _add_transfer_args(p)
    p.add_argument('--grid', type=parse_grid, required=True, help='comma-separated transfer sample counts')
    p.set_defaults(func=cmd_transfer_curve)

    p = sub.add_parser('make-figures', help='regenerate every result table in one run')
    p.add_argument('--n-source', type=int, default=3000, help='synthetic source samples (default 3000)')
    p.add_argument('--n-target', type=int, default=1000, help='synthetic target samples (default 1000)')
    p.add_argument('--shift', type=float, default=1.0,
                   help='scale of the source->target shift; 0 gives no shift (default 1.0)')
    p.add_argument('--labeled', type=int, default=Config.SOURCE_LABELED_COUNT,
                   help=f'labeled source samples for training (default {Config.SOURCE_LABELED_COUNT})')
    p.add_argument('--epochs', type=int, default=Config.EPOCHS,
                   help=f'source training epochs per model (default {Config.EPOCHS})')
    p.add_argument('--finetune-epochs', type=int, default=Config.FINETUNE_EPOCHS,
                   help=f'fine-tuning epochs per transfer repeat (default {Config.FINETUNE_EPOCHS})')
    p.add_argument('--repeats', type=int, default=Config.N_REPEATS,
                   help=f'transfer repeats per model (default {Config.N_REPEATS})')
    p.add_argument('--grid', type=parse_grid, default=[16, 32, 64, Config.SOURCE_LABELED_COUNT],
                   help='comma-separated labeled-source counts for the accuracy curve')
    p.add_argument('--models', type=lambda s: [m.strip() for m in s.split(',') if m.strip()],
                   default=[k.value for k in ModelKind], help='comma-separated model kinds')
    p.set_defaults(func=cmd_make_figures)

    return parser


def write_error(out_dir, error):
    document = error.to_document() if isinstance(error, BeamQtlError) else {
        'error': type(error).__name__, 'message': str(error),
    }
    text = json.dumps(document, sort_keys=True)
    print(text, file=sys.stderr)
    try:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / 'error.json').write_text(text + '\n', encoding='utf-8')
    except OSError:
        logger.warning(f"Could not write error.json to {out_dir}")
    return document


def run_command(args):
    Path(args.out).mkdir(parents=True, exist_ok=True)
    logger.info(f"Running {args.command} (seed {args.seed}, out {args.out})")
    return args.func(args)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logger(console_level=args.log_level)
    try:
        Config.validate()
        if getattr(args, 'models', None):
            unknown = sorted(set(args.models) - {k.value for k in ModelKind})
            if unknown:
                raise ConfigurationError(f"unknown model kinds: {unknown}")
        code = run_command(args)
        logger.info(f"{args.command} completed successfully")
        return code
    except (BeamQtlError, OSError) as e:
        logger.error(f"Error in {args.command}: {str(e)}", exc_info=True)
        write_error(args.out, e)
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {str(e)}", exc_info=True)
        write_error(args.out, e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
