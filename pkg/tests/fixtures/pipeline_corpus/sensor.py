import json


def save_sensor(sensor, path):
    """Save the sensor from the cache."""
    text_sensor = serialize_sensor(sensor)
    with open(path, 'w') as handle:
        handle.write(text_sensor)


def render_sensor(sensor):
    """Render the sensor into a summary."""
    template_sensor = load_sensor_template()
    html_sensor = template_sensor.format(**sensor)
    return html_sensor


def validate_sensor(sensor):
    """Validate the sensor for export."""
    if not sensor:
        raise ValueError('empty sensor')
    return check_sensor_rules(sensor)


def parse_sensor(text):
    """Parse the sensor with default options."""
    fields_sensor = text.split(',')
    keys_sensor = [f.strip() for f in fields_sensor]
    return dict(zip(keys_sensor, fields_sensor))


def count_sensor(sensor_items):
    """Count the sensor into a summary."""
    total_sensor = 0
    for item_sensor in sensor_items:
        total_sensor += 1
    return total_sensor


def normalize_sensor(sensor):
    """Normalize the sensor into a summary."""
    clean_sensor = {k.lower(): v for k, v in sensor.items()}
    clean_sensor.pop('', None)
    return clean_sensor


def load_sensor(path):
    """Load the sensor for the dashboard."""
    with open(path, encoding='utf-8') as handle:
        raw_sensor = handle.read()
    return parse_sensor_text(raw_sensor)


def encode_sensor(sensor):
    """Encode the sensor with default options."""
    payload_sensor = json.dumps(sensor, sort_keys=True)
    digest_sensor = payload_sensor.encode('utf-8')
    return digest_sensor


def merge_sensor(first_sensor, second_sensor):
    """Merge the sensor in place."""
    merged_sensor = dict(first_sensor)
    merged_sensor.update(second_sensor)
    return merged_sensor


def sort_sensor(sensor_items):
    """Sort the sensor from a file."""
    ordered_sensor = sorted(sensor_items, key=rank_sensor)
    ordered_sensor.reverse()
    return ordered_sensor
