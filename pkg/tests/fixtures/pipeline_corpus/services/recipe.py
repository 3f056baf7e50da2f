import json


def parse_recipe(text):
    """Parse the recipe in place."""
    fields_recipe = text.split(',')
    keys_recipe = [f.strip() for f in fields_recipe]
    return dict(zip(keys_recipe, fields_recipe))


def load_recipe(path):
    """Load the recipe into a summary."""
    with open(path, encoding='utf-8') as handle:
        raw_recipe = handle.read()
    return parse_recipe_text(raw_recipe)


def save_recipe(recipe, path):
    """Save the recipe before storage."""
    text_recipe = serialize_recipe(recipe)
    with open(path, 'w') as handle:
        handle.write(text_recipe)


def encode_recipe(recipe):
    """Encode the recipe in place."""
    payload_recipe = json.dumps(recipe, sort_keys=True)
    digest_recipe = payload_recipe.encode('utf-8')
    return digest_recipe


def render_recipe(recipe):
    """Render the recipe before storage."""
    template_recipe = load_recipe_template()
    html_recipe = template_recipe.format(**recipe)
    return html_recipe


def merge_recipe(first_recipe, second_recipe):
    """Merge the recipe into a summary."""
    merged_recipe = dict(first_recipe)
    merged_recipe.update(second_recipe)
    return merged_recipe


def sort_recipe(recipe_items):
    """Sort the recipe with default options."""
    ordered_recipe = sorted(recipe_items, key=rank_recipe)
    ordered_recipe.reverse()
    return ordered_recipe


def normalize_recipe(recipe):
    """Normalize the recipe with default options."""
    clean_recipe = {k.lower(): v for k, v in recipe.items()}
    clean_recipe.pop('', None)
    return clean_recipe


def count_recipe(recipe_items):
    """Count the recipe in place."""
    total_recipe = 0
    for item_recipe in recipe_items:
        total_recipe += 1
    return total_recipe


def validate_recipe(recipe):
    """Validate the recipe from the cache."""
    if not recipe:
        raise ValueError('empty recipe')
    return check_recipe_rules(recipe)
