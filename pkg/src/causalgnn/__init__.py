"""Probabilistic causal structure learning from observational data.

Pipeline: synthetic corpus generation -> statistical/information-theoretic
feature graphs -> edge-direction GNN classifier -> graph extraction
(PG/MLG/PDAG/MLDAG) -> evaluation (SHD, TPR, FPR, edge breakdown).
"""

from .dataset import DataMatrix, load_csv, save_csv, standardize
from .featuregraph import (FeatureGraph, LogisticPrior, UniformPrior,
                           build_feature_graph, load_feature_graph,
                           save_feature_graph, SCHEMA_VERSION)
from .gnn import (ModelConfig, ModelParams, OptimizerSettings,
                  edge_labels_from_dag, forward, gradient, init_params,
                  load_params, loss, save_params, train)
from .graphs import Dag, Digraph, read_edge_list, write_edge_list
from .inference import (EdgeProbabilities, TopologicalOrder, WeightedDigraph,
                        dag_log_prob, graph_log_prob, induced_weighted_graph,
                        load_edge_probabilities, ml_dag, ml_digraph,
                        ml_ordering, msdag, sample_dag, sample_digraph,
                        save_edge_probabilities)
from .metrics import EdgeBreakdown, edge_breakdown, fpr, shd, shd_per_d, tpr
from .synthgen import (CorpusSpec, SemConfig, gen_corpus, gen_er_dag,
                       gen_sf_dag, sample_sem, write_corpus)

__version__ = "0.1.0"
