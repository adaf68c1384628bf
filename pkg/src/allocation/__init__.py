""" Full-information allocation and the James-Stein correction of plug-in transfers """
