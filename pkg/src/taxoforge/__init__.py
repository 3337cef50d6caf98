"""taxoforge: business-taxonomy construction from annotated disclosure text.

Pipeline: extract concept-term candidates with POS/dependency templates,
filter them with a cost-sensitive PU classifier, compute co-occurrence term
similarities, induce a three-layer hypernym hierarchy with greedy
hierarchical affinity propagation, and map companies onto the leaves.
"""

from .candidates import (
    CandidateTable,
    TemplateConfig,
    TermCandidate,
    collect_candidates,
    extract_attributive_candidates,
    extract_noun_candidates,
    label_negatives,
)
from .corpus import (
    AnnotatedDocument,
    Corpus,
    CorpusFormatError,
    Token,
    cooccurrence_counts,
    document_counts,
    load_corpus,
    save_corpus,
)
from .features import FeatureMatrix, MarkerConfig, featurize
from .ghap import (
    APConfig,
    APState,
    ClusterResult,
    Taxonomy,
    ap_iterate,
    assign_members,
    build_hierarchy,
    cluster_layer,
    extract_exemplars,
    init_preferences,
)
from .pipeline import PipelineConfig, load_config, run_stage
from .pu import (
    FilteredTerm,
    PUConfig,
    TermClassifier,
    calibrate,
    cost_ratio,
    filter_terms,
    train,
)
from .similarity import (
    SimilarityConfig,
    SimilarityMatrix,
    WordStats,
    build_similarity_matrix,
    build_word_stats,
    directed_term_similarity,
    term_similarity,
    word_similarity,
    word_weight,
)
from .synth import SynthSpec, generate_synthetic_corpus, write_synthetic_corpus
from .taxonomy import (
    CompanyMapping,
    HypernymStats,
    export_taxonomy,
    hypernym_statistics,
    intra_class_similarity,
    map_companies,
)

__version__ = "0.1.0"
