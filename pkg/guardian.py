#!/usr/bin/env python3
from src.main import main

if __name__ == "__main__":
    main()
