from .interference import InterferenceGraph, load_graph, read_edges_csv, build_similarity_graph, graph_stats
from .exposure import compute_exposure, get_exposure, neighbor_counts
