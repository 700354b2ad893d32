"""iclens: demonstration construction, caption scoring, and attention
analysis for multimodal in-context learning."""

from .errors import (
    ConsistencyError,
    DataError,
    DomainError,
    FormatError,
    IclensError,
    LoadError,
)
from .tensor_io import Tensor, read_tensor, read_tensor_file, write_tensor, write_tensor_file
from .segmentation import (
    Role,
    TokenSegmentation,
    canonical_segmentation,
    load_segmentation,
    save_segmentation,
)
from .bundle import AttentionRecord, ModelCfg, RunBundle, Sample, load_run
from .retrieval import (
    EmbeddingTable,
    RetrievalResult,
    cosine_similarity,
    load_embedding_table,
    rs_sample,
    save_embedding_table,
    siir_retrieve,
)
from .captions import CaptionDataset, CaptionSource, load_caption_dataset
from .assignment import (
    DemoSequence,
    PromptTemplate,
    assign_caption,
    assign_fhl,
    assign_mgc,
    assign_mhl,
    build_sequence,
    normalize_caption,
)
from .text_metrics import (
    ChairLexicon,
    NGramProfile,
    build_document_frequency,
    chair,
    cider,
    clipscore,
    load_chair_lexicon,
    shortcut_cider,
    tokenize,
)
from .attention_metrics import (
    SENTINEL,
    LayerProfile,
    acar,
    attention_flow,
    iear,
    iear_components,
    layer_profile,
    vcar,
)
from .efficiency import MaskPlan, PrunePlan, anchor_mask, context_mask, kv_estimate, prune_plan
from .synth import (
    SynthSpec,
    gen_attention,
    oracle_acar,
    oracle_cider,
    oracle_iear,
    oracle_metric,
    oracle_vcar,
)

__version__ = "0.1.0"
