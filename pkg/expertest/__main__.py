from .cli import cli


def main() -> None:
    cli.run()


if __name__ == "__main__":
    main()
