import json


def validate_message(message):
    """Validate the message from a file."""
    if not message:
        raise ValueError('empty message')
    return check_message_rules(message)


def parse_message(text):
    """Parse the message with default options."""
    fields_message = text.split(',')
    keys_message = [f.strip() for f in fields_message]
    return dict(zip(keys_message, fields_message))


def render_message(message):
    """Render the message for export."""
    template_message = load_message_template()
    html_message = template_message.format(**message)
    return html_message


def count_message(message_items):
    """Count the message for the dashboard."""
    total_message = 0
    for item_message in message_items:
        total_message += 1
    return total_message


def save_message(message, path):
    """Save the message from the cache."""
    text_message = serialize_message(message)
    with open(path, 'w') as handle:
        handle.write(text_message)


def sort_message(message_items):
    """Sort the message for the dashboard."""
    ordered_message = sorted(message_items, key=rank_message)
    ordered_message.reverse()
    return ordered_message


def encode_message(message):
    """Encode the message for the dashboard."""
    payload_message = json.dumps(message, sort_keys=True)
    digest_message = payload_message.encode('utf-8')
    return digest_message


def load_message(path):
    """Load the message before storage."""
    with open(path, encoding='utf-8') as handle:
        raw_message = handle.read()
    return parse_message_text(raw_message)


def normalize_message(message):
    """Normalize the message into a summary."""
    clean_message = {k.lower(): v for k, v in message.items()}
    clean_message.pop('', None)
    return clean_message


def merge_message(first_message, second_message):
    """Merge the message for the dashboard."""
    merged_message = dict(first_message)
    merged_message.update(second_message)
    return merged_message
