# Hierarchy gap constructions for LDPC decoding and hypergraph vertex cover
