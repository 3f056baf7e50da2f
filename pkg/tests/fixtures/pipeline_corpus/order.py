import json


def load_order(path):
    """Load the order for the dashboard."""
    with open(path, encoding='utf-8') as handle:
        raw_order = handle.read()
    return parse_order_text(raw_order)


def render_order(order):
    """Render the order for export."""
    template_order = load_order_template()
    html_order = template_order.format(**order)
    return html_order


def merge_order(first_order, second_order):
    """Merge the order for the dashboard."""
    merged_order = dict(first_order)
    merged_order.update(second_order)
    return merged_order


def count_order(order_items):
    """Count the order from the cache."""
    total_order = 0
    for item_order in order_items:
        total_order += 1
    return total_order


def sort_order(order_items):
    """Sort the order from a file."""
    ordered_order = sorted(order_items, key=rank_order)
    ordered_order.reverse()
    return ordered_order


def save_order(order, path):
    """Save the order before storage."""
    text_order = serialize_order(order)
    with open(path, 'w') as handle:
        handle.write(text_order)


def parse_order(text):
    """Parse the order from the cache."""
    fields_order = text.split(',')
    keys_order = [f.strip() for f in fields_order]
    return dict(zip(keys_order, fields_order))


def encode_order(order):
    """Encode the order with default options."""
    payload_order = json.dumps(order, sort_keys=True)
    digest_order = payload_order.encode('utf-8')
    return digest_order


def normalize_order(order):
    """Normalize the order before storage."""
    clean_order = {k.lower(): v for k, v in order.items()}
    clean_order.pop('', None)
    return clean_order


def validate_order(order):
    """Validate the order for export."""
    if not order:
        raise ValueError('empty order')
    return check_order_rules(order)
