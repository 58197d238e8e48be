"""CSV ingestion for measured beam SNR sessions.

Schema (header required): ``label,domain,session,b0,...,b35``; UTF-8, LF line
endings, features as decimals. Line numbers in errors are 1-based file lines
(the header is line 1).
"""
from pathlib import Path
import csv
import logging
import re

import numpy as np
import pandas as pd

from config import Config
from data_collection.dataset import Dataset, Domain, csv_columns, feature_columns
from utils.errors import DataFormatError

logger = logging.getLogger('beam_qtl.csv_io')

FLOAT_FORMAT = '%.17g'
FIRST_DATA_LINE = 2


def to_csv_text(dataset: Dataset) -> str:
    return dataset.to_frame().to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')


def write_csv(dataset: Dataset, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(to_csv_text(dataset))
    logger.info(f"Wrote {len(dataset)} samples to {path}")
    return path


def _first_bad(mask):
    return FIRST_DATA_LINE + int(np.flatnonzero(mask)[0])


def _integer_column(frame, name, path):
    values = pd.to_numeric(frame[name], errors='coerce')
    bad = values.isna().to_numpy() | (values.to_numpy() != np.round(values.to_numpy()))
    if bad.any():
        raise DataFormatError(f"column {name!r} must hold integers", line=_first_bad(bad), path=path)
    return values.to_numpy().astype(np.int64)


def _check_encoding(path):
    raw = path.read_bytes()
    try:
        raw.decode('utf-8')
    except UnicodeDecodeError as e:
        raise DataFormatError(f"invalid UTF-8 byte 0x{raw[e.start]:02x}", line=raw.count(b'\n', 0, e.start) + 1,
                              path=path)


def _check_arity(path):
    expected = len(csv_columns())
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        for row in reader:
            if len(row) != expected:
                raise DataFormatError(
                    f"expected {expected} fields, found {len(row)}", line=reader.line_num, path=path)


def load_csv(path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"no such file: {path}", path=path)

    logger.debug(f"Reading beam SNR samples from {path}")
    _check_encoding(path)
    _check_arity(path)
    try:
        frame = pd.read_csv(
            path,
            dtype={'label': str, 'domain': str, 'session': str},
            float_precision='round_trip',
            skip_blank_lines=False,
            encoding='utf-8',
        )
    except pd.errors.EmptyDataError:
        raise DataFormatError("file is empty; expected a header", line=1, path=path)
    except pd.errors.ParserError as e:
        match = re.search(r'line (\d+)', str(e))
        raise DataFormatError(f"wrong number of fields ({e})",
                              line=int(match.group(1)) if match else None, path=path)

    if list(frame.columns) != csv_columns():
        raise DataFormatError(
            f"header must be {','.join(csv_columns()[:4])},...,b{Config.N_FEATURES - 1}; "
            f"got {len(frame.columns)} columns", line=1, path=path)

    features = frame[feature_columns()].apply(pd.to_numeric, errors='coerce').to_numpy(dtype=np.float64)
    bad = ~np.isfinite(features).all(axis=1)
    if bad.any():
        raise DataFormatError(
            f"expected {Config.N_FEATURES} finite beam SNR values", line=_first_bad(bad), path=path)

    labels = _integer_column(frame, 'label', path)
    out_of_range = (labels < 0) | (labels >= Config.N_CLASSES)
    if out_of_range.any():
        raise DataFormatError(f"pose label out of range 0..{Config.N_CLASSES - 1}",
                              line=_first_bad(out_of_range), path=path)

    domains = frame['domain'].fillna('').str.strip().str.lower()
    bad_domain = ~domains.isin([d.value for d in Domain]).to_numpy()
    if bad_domain.any():
        raise DataFormatError("domain must be 'source' or 'target'", line=_first_bad(bad_domain), path=path)

    sessions = _integer_column(frame, 'session', path)

    dataset = Dataset(features, labels, domains.to_numpy(), sessions)
    logger.info(f"Loaded {len(dataset)} samples from {path}")
    return dataset
