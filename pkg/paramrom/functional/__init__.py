from .derivatives import estimate_derivatives
from .features import FEATURE_ORDERING, FeatureDims, build_data_matrix, compact_kron
