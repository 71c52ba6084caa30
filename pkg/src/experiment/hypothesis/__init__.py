"""
Hypothesis testing module for the experiment package.
Contains the observation model, the information games, the bounds on the optimal
cost, the decision policies, the DP oracle, the Monte Carlo engine and the noisy
dynamic search builders.
"""
