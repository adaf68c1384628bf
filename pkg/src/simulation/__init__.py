""" Monte-Carlo experiment engine for the allocation rules """
