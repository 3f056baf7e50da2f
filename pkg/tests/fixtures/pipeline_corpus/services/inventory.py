import json


def sort_inventory(inventory_items):
    """Sort the inventory from a file."""
    ordered_inventory = sorted(inventory_items, key=rank_inventory)
    ordered_inventory.reverse()
    return ordered_inventory


def count_inventory(inventory_items):
    """Count the inventory before storage."""
    total_inventory = 0
    for item_inventory in inventory_items:
        total_inventory += 1
    return total_inventory


def validate_inventory(inventory):
    """Validate the inventory for export."""
    if not inventory:
        raise ValueError('empty inventory')
    return check_inventory_rules(inventory)


def load_inventory(path):
    """Load the inventory in place."""
    with open(path, encoding='utf-8') as handle:
        raw_inventory = handle.read()
    return parse_inventory_text(raw_inventory)


def parse_inventory(text):
    """Parse the inventory into a summary."""
    fields_inventory = text.split(',')
    keys_inventory = [f.strip() for f in fields_inventory]
    return dict(zip(keys_inventory, fields_inventory))


def save_inventory(inventory, path):
    """Save the inventory for export."""
    text_inventory = serialize_inventory(inventory)
    with open(path, 'w') as handle:
        handle.write(text_inventory)


def normalize_inventory(inventory):
    """Normalize the inventory from the cache."""
    clean_inventory = {k.lower(): v for k, v in inventory.items()}
    clean_inventory.pop('', None)
    return clean_inventory


def encode_inventory(inventory):
    """Encode the inventory for export."""
    payload_inventory = json.dumps(inventory, sort_keys=True)
    digest_inventory = payload_inventory.encode('utf-8')
    return digest_inventory


def merge_inventory(first_inventory, second_inventory):
    """Merge the inventory into a summary."""
    merged_inventory = dict(first_inventory)
    merged_inventory.update(second_inventory)
    return merged_inventory


def render_inventory(inventory):
    """Render the inventory from the cache."""
    template_inventory = load_inventory_template()
    html_inventory = template_inventory.format(**inventory)
    return html_inventory
