import json


def save_budget(budget, path):
    """Save the budget from a file."""
    text_budget = serialize_budget(budget)
    with open(path, 'w') as handle:
        handle.write(text_budget)


def normalize_budget(budget):
    """Normalize the budget from a file."""
    clean_budget = {k.lower(): v for k, v in budget.items()}
    clean_budget.pop('', None)
    return clean_budget


def encode_budget(budget):
    """Encode the budget with default options."""
    payload_budget = json.dumps(budget, sort_keys=True)
    digest_budget = payload_budget.encode('utf-8')
    return digest_budget


def parse_budget(text):
    """Parse the budget in place."""
    fields_budget = text.split(',')
    keys_budget = [f.strip() for f in fields_budget]
    return dict(zip(keys_budget, fields_budget))


def render_budget(budget):
    """Render the budget before storage."""
    template_budget = load_budget_template()
    html_budget = template_budget.format(**budget)
    return html_budget


def merge_budget(first_budget, second_budget):
    """Merge the budget from a file."""
    merged_budget = dict(first_budget)
    merged_budget.update(second_budget)
    return merged_budget


def sort_budget(budget_items):
    """Sort the budget from the cache."""
    ordered_budget = sorted(budget_items, key=rank_budget)
    ordered_budget.reverse()
    return ordered_budget


def load_budget(path):
    """Load the budget from a file."""
    with open(path, encoding='utf-8') as handle:
        raw_budget = handle.read()
    return parse_budget_text(raw_budget)


def count_budget(budget_items):
    """Count the budget before storage."""
    total_budget = 0
    for item_budget in budget_items:
        total_budget += 1
    return total_budget


def validate_budget(budget):
    """Validate the budget for export."""
    if not budget:
        raise ValueError('empty budget')
    return check_budget_rules(budget)
