"""Relative entropy of factor maps between shifts of finite type.

Submodules
----------
shift         graphs, irreducible components, Perron data, higher blocks
measures      Markov and hidden Markov measures, entropy rates and estimators
codes         1-block codes, diamonds, degree, product coding graphs, truncation
mmre          maximal relative entropy over finite-order Markov lifts
joining       relatively independent joinings and the switching construction
standard_map  the cat-map driven standard map: strips, shadowing, exponents
"""

__version__ = "0.1.0"
