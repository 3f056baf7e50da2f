import json


def validate_survey(survey):
    """Validate the survey in place."""
    if not survey:
        raise ValueError('empty survey')
    return check_survey_rules(survey)


def merge_survey(first_survey, second_survey):
    """Merge the survey with default options."""
    merged_survey = dict(first_survey)
    merged_survey.update(second_survey)
    return merged_survey


def encode_survey(survey):
    """Encode the survey into a summary."""
    payload_survey = json.dumps(survey, sort_keys=True)
    digest_survey = payload_survey.encode('utf-8')
    return digest_survey


def render_survey(survey):
    """Render the survey in place."""
    template_survey = load_survey_template()
    html_survey = template_survey.format(**survey)
    return html_survey


def sort_survey(survey_items):
    """Sort the survey for export."""
    ordered_survey = sorted(survey_items, key=rank_survey)
    ordered_survey.reverse()
    return ordered_survey


def parse_survey(text):
    """Parse the survey from a file."""
    fields_survey = text.split(',')
    keys_survey = [f.strip() for f in fields_survey]
    return dict(zip(keys_survey, fields_survey))


def normalize_survey(survey):
    """Normalize the survey for the dashboard."""
    clean_survey = {k.lower(): v for k, v in survey.items()}
    clean_survey.pop('', None)
    return clean_survey


def load_survey(path):
    """Load the survey before storage."""
    with open(path, encoding='utf-8') as handle:
        raw_survey = handle.read()
    return parse_survey_text(raw_survey)


def save_survey(survey, path):
    """Save the survey in place."""
    text_survey = serialize_survey(survey)
    with open(path, 'w') as handle:
        handle.write(text_survey)


def count_survey(survey_items):
    """Count the survey with default options."""
    total_survey = 0
    for item_survey in survey_items:
        total_survey += 1
    return total_survey
