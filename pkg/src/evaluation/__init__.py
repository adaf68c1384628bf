""" Loss, loss ratio, targeting errors and regret estimates """
