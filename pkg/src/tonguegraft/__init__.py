"""Cross-lingual vocabulary expansion for subword tokenizers.

The toolkit grafts a target-language BPE vocabulary onto an existing
tokenizer, rebuilds the embedding rows for the grafted tokens, and prepares
mixed continual-pretraining data (corpus mixtures, parallel-text formatting,
sequence packing) together with the training-run arithmetic (learning-rate
schedule, compute estimates, parallelism layout checks) and tokenizer
diagnostics.
"""

from .config import PipelineConfig, config_digest, load_config, parse_config
from .data_pipeline import (
    Direction,
    ExampleFormat,
    FormattedExample,
    MixturePlan,
    MixtureSource,
    MixtureSpec,
    PackedSequence,
    PackStats,
    ParallelPair,
    PlanItem,
    ScheduleMode,
    TrainingDoc,
    build_schedule,
    example_as_doc,
    format_ntp,
    format_pairs,
    format_ti,
    ntp_text,
    pack_sequences,
    plan_mixture,
    read_documents,
    read_parallel_pairs,
    read_stream,
    realize_plan,
    ti_instruction,
    ti_prefix_text,
    ti_text,
    write_packed,
    write_plan,
    write_stream,
)
from .diagnostics import (
    BalanceReport,
    EfficiencyReport,
    TransitionReport,
    char_f1,
    class_balance,
    efficiency_report,
    exact_match,
    ratio_to_gain,
    score_transition,
)
from .embedding_surgery import (
    EmbeddingMatrix,
    LogitCheckReport,
    MatrixError,
    MatrixMagicError,
    MatrixSizeError,
    MatrixValueError,
    MatrixVersionError,
    logit_consistency_check,
    mean_init,
    read_matrix,
    write_matrix,
)
from .errors import (
    ConfigError,
    CorpusError,
    InvalidModelError,
    MixtureError,
    ModelFormatError,
    ScheduleError,
    TonguegraftError,
    VocabularyError,
)
from .fixtures import (
    build_demo_base,
    build_demo_expanded,
    cjk_corpus_texts,
    load_ascii_corpus,
    load_cjk_corpus,
)
from .tokenizer import (
    BYTE_TOKENS,
    DecodedText,
    SegmentedCorpus,
    TokenizerModel,
    decode,
    decode_with_metadata,
    dumps_model,
    encode,
    load_model,
    loads_model,
    normalize,
    read_segmented_corpus,
    sample_records,
    save_model,
    split_symbols,
    train_bpe,
)
from .train_config import (
    REFERENCE_ARCHS,
    ArchSpec,
    FlopsEstimate,
    LayoutReport,
    TrainConfig,
    estimate_flops,
    lr_at,
    throughput_efficiency,
    validate_layout,
)
from .vocab_expansion import (
    ESCAPE_CHAR,
    AdditionEntry,
    AdditionSet,
    build_addition,
    dumps_addition,
    load_addition,
    loads_addition,
    merge_vocabularies,
    save_addition,
)

__version__ = "0.1.0"
