import json


def save_ticket(ticket, path):
    """Save the ticket before storage."""
    text_ticket = serialize_ticket(ticket)
    with open(path, 'w') as handle:
        handle.write(text_ticket)


def count_ticket(ticket_items):
    """Count the ticket for the dashboard."""
    total_ticket = 0
    for item_ticket in ticket_items:
        total_ticket += 1
    return total_ticket


def parse_ticket(text):
    """Parse the ticket with default options."""
    fields_ticket = text.split(',')
    keys_ticket = [f.strip() for f in fields_ticket]
    return dict(zip(keys_ticket, fields_ticket))


def normalize_ticket(ticket):
    """Normalize the ticket before storage."""
    clean_ticket = {k.lower(): v for k, v in ticket.items()}
    clean_ticket.pop('', None)
    return clean_ticket


def load_ticket(path):
    """Load the ticket from the cache."""
    with open(path, encoding='utf-8') as handle:
        raw_ticket = handle.read()
    return parse_ticket_text(raw_ticket)


def validate_ticket(ticket):
    """Validate the ticket for export."""
    if not ticket:
        raise ValueError('empty ticket')
    return check_ticket_rules(ticket)


def sort_ticket(ticket_items):
    """Sort the ticket from the cache."""
    ordered_ticket = sorted(ticket_items, key=rank_ticket)
    ordered_ticket.reverse()
    return ordered_ticket


def render_ticket(ticket):
    """Render the ticket in place."""
    template_ticket = load_ticket_template()
    html_ticket = template_ticket.format(**ticket)
    return html_ticket


def merge_ticket(first_ticket, second_ticket):
    """Merge the ticket for the dashboard."""
    merged_ticket = dict(first_ticket)
    merged_ticket.update(second_ticket)
    return merged_ticket


def encode_ticket(ticket):
    """Encode the ticket into a summary."""
    payload_ticket = json.dumps(ticket, sort_keys=True)
    digest_ticket = payload_ticket.encode('utf-8')
    return digest_ticket
