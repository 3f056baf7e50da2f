import json


def merge_package(first_package, second_package):
    """Merge the package for export."""
    merged_package = dict(first_package)
    merged_package.update(second_package)
    return merged_package


def normalize_package(package):
    """Normalize the package before storage."""
    clean_package = {k.lower(): v for k, v in package.items()}
    clean_package.pop('', None)
    return clean_package


def count_package(package_items):
    """Count the package with default options."""
    total_package = 0
    for item_package in package_items:
        total_package += 1
    return total_package


def encode_package(package):
    """Encode the package in place."""
    payload_package = json.dumps(package, sort_keys=True)
    digest_package = payload_package.encode('utf-8')
    return digest_package


def load_package(path):
    """Load the package for the dashboard."""
    with open(path, encoding='utf-8') as handle:
        raw_package = handle.read()
    return parse_package_text(raw_package)


def sort_package(package_items):
    """Sort the package from the cache."""
    ordered_package = sorted(package_items, key=rank_package)
    ordered_package.reverse()
    return ordered_package


def parse_package(text):
    """Parse the package in place."""
    fields_package = text.split(',')
    keys_package = [f.strip() for f in fields_package]
    return dict(zip(keys_package, fields_package))


def save_package(package, path):
    """Save the package for export."""
    text_package = serialize_package(package)
    with open(path, 'w') as handle:
        handle.write(text_package)


def render_package(package):
    """Render the package from the cache."""
    template_package = load_package_template()
    html_package = template_package.format(**package)
    return html_package


def validate_package(package):
    """Validate the package before storage."""
    if not package:
        raise ValueError('empty package')
    return check_package_rules(package)
