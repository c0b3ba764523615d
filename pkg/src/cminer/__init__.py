"""cminer: a self-contained computational content-analysis workbench.

Corpus import and deduplication, parameterized preprocessing, co-occurrence
statistics, LDA topic modeling with qualitative validation, active-learning
text classification, and CSV/QDPX interchange, usable as a library, a CLI
(``cm``) or an HTTP service.
"""

from .corpus import (Document, EntitySpan, ImportMapping, ImportReport,
                     DuplicateGroup, import_csv, tag_entities, deduplicate,
                     read_gazetteer)
from .pipeline import (AnalysisParams, Vocabulary, DocTermMatrix, FILTERED,
                       tokenize, document_tokens, build_vocabulary, build_dtm,
                       blacklist_from_entities, load_stopwords, read_wordlist)
from .cooccurrence import (ContingencyCounts, CooccurrenceResult,
                           term_frequencies, time_series, cooccurrences)
from .topics import (LdaConfig, TopicModel, TopicLabel, HighlightSpan,
                     fit_lda, top_words, coherence_umass, highlight,
                     filter_by_topic, topic_by_metadata, label_topic,
                     save_model, load_model)
from .classify import (Code, Codebook, CodingSession, NaiveBayesModel,
                       EvalReport, train, predict, next_query, record_label,
                       evaluate, simulate_active_learning)
from .interchange import (QdpxProject, QdpxCode, QdpxSource, QdpxSelection,
                          export_corpus_csv, export_qdpx, import_qdpx,
                          export_cooc_csv, export_theta_csv, export_phi_csv,
                          export_labels_csv)

__version__ = "0.1.0"
