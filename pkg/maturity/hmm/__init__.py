# Hidden Markov Model Module
