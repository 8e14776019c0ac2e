"""List-decodable linear regression via low-degree moment relaxations."""

__version__ = "0.1.0"
