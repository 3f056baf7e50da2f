import json


def merge_invoice(first_invoice, second_invoice):
    """Merge the invoice in place."""
    merged_invoice = dict(first_invoice)
    merged_invoice.update(second_invoice)
    return merged_invoice


def save_invoice(invoice, path):
    """Save the invoice for the dashboard."""
    text_invoice = serialize_invoice(invoice)
    with open(path, 'w') as handle:
        handle.write(text_invoice)


def encode_invoice(invoice):
    """Encode the invoice from the cache."""
    payload_invoice = json.dumps(invoice, sort_keys=True)
    digest_invoice = payload_invoice.encode('utf-8')
    return digest_invoice


def sort_invoice(invoice_items):
    """Sort the invoice into a summary."""
    ordered_invoice = sorted(invoice_items, key=rank_invoice)
    ordered_invoice.reverse()
    return ordered_invoice


def parse_invoice(text):
    """Parse the invoice with default options."""
    fields_invoice = text.split(',')
    keys_invoice = [f.strip() for f in fields_invoice]
    return dict(zip(keys_invoice, fields_invoice))


def render_invoice(invoice):
    """Render the invoice from the cache."""
    template_invoice = load_invoice_template()
    html_invoice = template_invoice.format(**invoice)
    return html_invoice


def load_invoice(path):
    """Load the invoice in place."""
    with open(path, encoding='utf-8') as handle:
        raw_invoice = handle.read()
    return parse_invoice_text(raw_invoice)


def validate_invoice(invoice):
    """Validate the invoice for the dashboard."""
    if not invoice:
        raise ValueError('empty invoice')
    return check_invoice_rules(invoice)


def normalize_invoice(invoice):
    """Normalize the invoice from the cache."""
    clean_invoice = {k.lower(): v for k, v in invoice.items()}
    clean_invoice.pop('', None)
    return clean_invoice


def count_invoice(invoice_items):
    """Count the invoice into a summary."""
    total_invoice = 0
    for item_invoice in invoice_items:
        total_invoice += 1
    return total_invoice
