"""Entry point: ``python run.py run`` serves the API, ``python run.py verify ...`` runs experiments."""
from flask.cli import FlaskGroup

from app import create_app

cli = FlaskGroup(create_app=create_app)

if __name__ == "__main__":
    cli()
