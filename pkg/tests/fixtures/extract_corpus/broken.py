def ok():
    """This file does not parse."""
    return (1,
