"""Python bindings for the somiap place and face recognition core."""

import json

from ._somiap import (
    Cascade,
    ContractError,
    DecodeError,
    IoError,
    ParseError,
    SomiapError,
    compute_hash,
    dct2,
    default_threshold,
    hamming,
    hash_algorithms,
    jacobi_eigh,
    load_image,
    orb_keypoints,
    orb_match_count,
    to_gray,
)
from ._somiap import analyze_json as _analyze_json


def analyze(index, image, cascade=None, query_id="query"):
    """Run place matching and face analysis against a manifest; returns a dict."""
    return json.loads(_analyze_json(index, image, cascade, query_id))


__all__ = [
    "Cascade",
    "ContractError",
    "DecodeError",
    "IoError",
    "ParseError",
    "SomiapError",
    "analyze",
    "compute_hash",
    "dct2",
    "default_threshold",
    "hamming",
    "hash_algorithms",
    "jacobi_eigh",
    "load_image",
    "orb_keypoints",
    "orb_match_count",
    "to_gray",
]
