from bcq.cli import main

main()
