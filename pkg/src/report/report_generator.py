"""Flat result tables and summary documents for external plotting.

Every writer returns the path(s) it produced and logs them; nothing here renders
figures.
"""
from datetime import datetime, timezone
from pathlib import Path
import json
import logging
import platform

import jinja2
import numpy as np
import pandas as pd

from config import Config

logger = logging.getLogger('beam_qtl.report')

SUMMARY_TEMPLATE = jinja2.Template("""\
# {{ title }}

Generated {{ generated }}

{% if summary.parameters -%}
## Model

| kind | quantum parameters | classical parameters |
|------|-------------------:|---------------------:|
| {{ summary.model_kind }} | {{ summary.parameters.quantum }} | {{ summary.parameters.classical }} |

{% endif -%}
{% if summary.evaluation -%}
## Evaluation ({{ summary.evaluation.n_samples }} samples)

- accuracy: {{ "%.4f"|format(summary.evaluation.accuracy) }}
- macro AUC: {{ fmt(summary.evaluation.macro_auc) }}
- micro AUC: {{ fmt(summary.evaluation.micro_auc) }}

| class | samples | AUC |
|------:|--------:|----:|
{% for auc in summary.evaluation.class_auc -%}
| {{ loop.index0 }} | {{ summary.evaluation.class_counts[loop.index0] }} | {{ fmt(auc) }} |
{% endfor %}
{% endif -%}
{% if summary.repeats -%}
## Transfer repeats

| metric | mean | std |
|--------|-----:|----:|
{% for name, value in summary.repeats.mean.items() -%}
| {{ name }} | {{ fmt(value) }} | {{ fmt(summary.repeats.std[name]) }} |
{% endfor %}
{% endif -%}
""")


def _fmt(value):
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return 'n/a'
    return f"{value:.4f}"


def _ensure_dir(out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _jsonable(value):
    """numpy scalars/arrays and NaN into plain JSON values (NaN becomes null)"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(document, path):
    path = Path(path)
    _ensure_dir(path.parent)
    path.write_text(json.dumps(_jsonable(document), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    logger.info(f"Wrote {path}")
    return path


def write_eval_tables(report, out_dir, extra=None):
    """confusion.csv, roc_class_<k>.csv per class and summary.json for one EvalReport"""
    out_dir = _ensure_dir(out_dir)
    labels = [str(k) for k in range(report.confusion.shape[0])]
    confusion = pd.DataFrame(report.confusion, index=pd.Index(labels, name='true'), columns=labels)
    confusion.to_csv(out_dir / 'confusion.csv', lineterminator='\n')
    written = [out_dir / 'confusion.csv']

    for k, curve in report.roc.items():
        path = out_dir / f"roc_class_{k}.csv"
        pd.DataFrame({'threshold': curve.thresholds, 'fpr': curve.fpr, 'tpr': curve.tpr}) \
            .to_csv(path, index=False, lineterminator='\n')
        written.append(path)

    summary = {'format_version': Config.SUMMARY_FORMAT_VERSION, **report.to_summary(), **(extra or {})}
    written.append(write_json(summary, out_dir / 'summary.json'))
    logger.info(f"Wrote evaluation tables to {out_dir}")
    return written


def write_curve(table: pd.DataFrame, out_dir, name='curve'):
    path = _ensure_dir(out_dir) / f"{name}.csv"
    table.to_csv(path, index=False, lineterminator='\n')
    logger.info(f"Wrote {path} ({len(table)} points)")
    return path


def package_versions():
    import numpy
    import pandas
    import sklearn

    return {
        'python': platform.python_version(),
        'numpy': numpy.__version__,
        'pandas': pandas.__version__,
        'scikit-learn': sklearn.__version__,
    }


def write_run_metadata(out_dir, command, config, seeds, dataset_hash=None, metrics=None):
    """metadata.json: everything needed to re-run a command with the same result"""
    document = {
        'format_version': Config.METADATA_FORMAT_VERSION,
        'command': command,
        'config': config,
        'seeds': seeds,
        'dataset_hash': dataset_hash,
        'metrics': metrics or {},
        'versions': package_versions(),
        'created': datetime.now(timezone.utc).isoformat(timespec='seconds'),
    }
    return write_json(document, Path(out_dir) / 'metadata.json')


def render_markdown_summary(summary, title='beam-qtl run summary', generated=None):
    generated = generated or datetime.now(timezone.utc).strftime('%Y-%m-%d %H:%M UTC')
    return SUMMARY_TEMPLATE.render(summary=_jsonable(summary), title=title, generated=generated, fmt=_fmt)


def write_markdown_summary(summary, out_dir, title='beam-qtl run summary'):
    path = _ensure_dir(out_dir) / 'summary.md'
    path.write_text(render_markdown_summary(summary, title), encoding='utf-8')
    logger.info(f"Wrote {path}")
    return path
