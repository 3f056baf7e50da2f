def __init__(self, budget):
    """Create the budget holder object."""
    self.budget = budget
    self.spent = 0


def test_load_invoice():
    """Check that invoices load from disk."""
    invoice = load_invoice("x")
    assert invoice


def ping():
    """Ping."""
    return True
    # unreachable


def tiny(x):
    """Return the value unchanged always."""
    return x
