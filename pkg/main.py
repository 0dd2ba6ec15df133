from src import entrypoint

if __name__ == "__main__":
    entrypoint.main()
