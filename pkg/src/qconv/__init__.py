"""Quantum convolution of qudit and qubit states, with stabilizer-entropy tools."""
from .convolution import (
    ConvolutionParams,
    NoValidParams,
    QubitConvolution,
    TripleConvolutionParams,
    complementary_convolve,
    conv2,
    convolve,
    convolve_fast,
    find_params,
    find_triple_params,
    iterate_convolution,
    qubit_convolve,
    triple_convolve,
)
from .entropy import max_relative, relative_entropy, renyi, renyi_relative, trace_distance, von_neumann
from .magic import (
    clt_bound,
    clt_relative_entropy_trace,
    doubling_constant,
    magic_measure_direct,
    magic_measure_msps,
    mean_state,
    qist_bound,
    ruzsa_divergence,
    to_zero_mean,
)
from .phase_space import CharacteristicFunction, PhasePoint, SystemShape, char_function, inverse_char, weyl
from .stabilizers import build_catalog, clifford_generators, enumerate_msps, enumerate_pure_stabilizers, is_stabilizer_pure
from .states import DensityMatrix, load_state, maximally_mixed, pure_state, random_density, random_pure, save_state, t_state

__version__ = "0.1.0"
