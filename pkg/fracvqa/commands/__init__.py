# Subcomandos da CLI; cada módulo expõe register(subparsers)
from fracvqa.commands import compare, noise_study, solve, sweep

COMMANDS = (solve, sweep, compare, noise_study)
