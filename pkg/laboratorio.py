"""
laboratorio.py: Punto de entrada de la línea de comandos

Ejemplo de uso:
    $ python laboratorio.py lengthgen --scale smoke --family ssm
    $ python laboratorio.py --log-level DEBUG finite --out resultados
"""

from utils.cli import main

if __name__ == "__main__":
    main(prog_name="laboratorio")
