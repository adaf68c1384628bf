""" Prior estimation and posterior means for Gaussian location mixtures """
