"""tspack: lossless packing of multi-rate time-series recordings into
Matroska containers — sensor streams as FLAC-subset / rice32 audio tracks,
sparse annotations as ASS subtitle tracks — plus the inverse, seeking
through the container's cue index, and a storage/runtime benchmark.
"""

from .model import (Comparison, Dataset, EncodedFrame, EncodedTrack, Event,
                    JitterReport, SampleFormat, SparseTrack, StreamMeta,
                    TimecodedSeries, UniformStream, dataset_equal,
                    validate_uniform)
from .errors import (CsvError, DataError, EbmlError, FlacBadMagic,
                     FlacCrcError, FlacError, FlacMd5Error, GapError,
                     JitterViolation, ManifestError, MkvError,
                     NonMonotonicTimestamps, Rice32Error, RiceDecodeError,
                     SsaError, TspackError, UsageError)
from .ingest import CsvSpec, read_csv, read_f32, write_csv, write_f32
from .resample import ResampleStrategy, align, resample
from .flac import (FlacStreamConfig, choose_rice_k, fixed_predict,
                   fixed_unpredict, flac_decode, flac_encode, rice_decode,
                   rice_encode)
from .rice32 import rice32_decode, rice32_encode
from .ssa import (SsaDocument, events_from_low_rate_stream, ssa_parse,
                  ssa_serialize)
from .ebml import vint_read, vint_write
from .mkv import MkvFile, MuxOptions, TrackPlan, demux, mux
from .packer import encode_dataset, encode_stream, pack, skeleton, unpack, unpack_window
from . import bench

__version__ = "0.1.0"

__all__ = [
    "SampleFormat", "StreamMeta", "UniformStream", "TimecodedSeries", "Event",
    "SparseTrack", "Dataset", "JitterReport", "Comparison", "EncodedFrame",
    "EncodedTrack", "validate_uniform", "dataset_equal",
    "CsvSpec", "read_csv", "write_csv", "read_f32", "write_f32",
    "ResampleStrategy", "resample", "align",
    "FlacStreamConfig", "fixed_predict", "fixed_unpredict", "rice_encode",
    "rice_decode", "choose_rice_k", "flac_encode", "flac_decode",
    "rice32_encode", "rice32_decode",
    "SsaDocument", "ssa_serialize", "ssa_parse", "events_from_low_rate_stream",
    "vint_write", "vint_read", "MuxOptions", "TrackPlan", "MkvFile", "mux", "demux",
    "encode_stream", "encode_dataset", "pack", "unpack", "unpack_window", "skeleton",
    "bench",
    "TspackError", "UsageError", "DataError", "CsvError", "NonMonotonicTimestamps",
    "JitterViolation", "GapError", "SsaError", "RiceDecodeError", "FlacError",
    "FlacBadMagic", "FlacCrcError", "FlacMd5Error", "Rice32Error", "EbmlError",
    "MkvError", "ManifestError",
    "__version__",
]
