""" Allocation rules mapping a noisy panel to a transfer vector """
