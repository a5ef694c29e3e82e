from collide.cli import main

main()
