"""
Reading garment tags
====================

Tags print fiber names in many spellings. The parser maps them onto a closed
vocabulary and checks that the percentages add up.
"""

from tagphys.tagparse import parse_tag, validate_attributes
from tagphys.errors import UnrecognizedFiber

# a typical knit top; Spandex is a trade name for Elastane
top = parse_tag("95% Cotton, 5% Spandex", "Jersey", "knit", density=160, thickness=0.6)
print(top.composition.render())  # 95% Cotton, 5% Elastane
print(top.family, top.structure)

# family variants collapse onto one name
print(parse_tag("100% Polyester", "satin-style", "woven").family)  # satin

# a woven jersey is a contradiction, and the validator says so
odd = parse_tag("100% Cotton", "jersey", "woven")
print(validate_attributes(odd).violations)

# coats often list shell and lining separately; the shell is parsed, the
# entry is flagged as multi-layer
coat = parse_tag("Shell: 100% Wool; Lining: 100% Viscose", "fleece", "knit")
print(coat.composition.render(), coat.layer_headers)

# fibers outside the vocabulary are rejected rather than guessed
try:
    parse_tag("70% Cork 30% Cotton", "twill", "woven")
except UnrecognizedFiber as exc:
    print("rejected:", exc.name)
